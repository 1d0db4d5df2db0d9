"""Spatter signature extraction and per-layer registration.

For each monitored frame the segmented label map is reduced to a compact
signature: the melt pool's center (largest melt-pool component), the number
of spatter clusters found by DBSCAN, and each cluster's ejection angle
relative to the laser scan direction. Signatures are then registered on the
build plate by mapping the melt-pool center through the frame's
pixel-to-plate transform and collected per layer.

Angle convention: angles are measured from the scan-direction unit vector
to the spatter displacement with atan2(dy, dx) arithmetic on image axes,
reported in degrees in [0, 360). 0 means directly ahead of the scan and 180
directly behind it (the melt-pool tail).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .imaging import MELT_POOL, SPATTER, Frame, Homography, LabelMap, connected_components
from .pgmio import dump_json, load_json


class NoMeltPoolError(ValueError):
    """Raised when a label map contains no melt-pool pixels."""


class UndefinedAngleError(ValueError):
    """Raised when a spatter centroid coincides with the melt-pool center."""


@dataclass(frozen=True)
class DbscanParams:
    """Neighborhood radius (pixels) and core-point threshold for DBSCAN."""

    eps: float = 3.0
    min_pts: int = 2

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


def dbscan(points: np.ndarray, params: DbscanParams) -> tuple[list[set[int]], set[int]]:
    """Standard DBSCAN over 2-D points with Euclidean distance.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``. Clusters are maximal density-connected sets; border
    points join the first cluster that claims them, with ties resolved by
    input order, so the result is deterministic for a fixed point order.

    Returns (clusters, noise) as index sets into ``points``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = pts.shape[0]
    if n == 0:
        return [], set()

    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    within = d2 <= params.eps * params.eps
    neighbor_lists = [np.nonzero(within[i])[0] for i in range(n)]
    core = np.array([len(nb) >= params.min_pts for nb in neighbor_lists])

    labels = np.zeros(n, dtype=int)  # 0 = unclaimed, >0 = cluster id
    clusters: list[set[int]] = []
    for i in range(n):
        if labels[i] != 0 or not core[i]:
            continue
        cid = len(clusters) + 1
        members = {i}
        labels[i] = cid
        queue = [i]
        while queue:
            q = queue.pop(0)
            for nb in neighbor_lists[q]:
                if labels[nb] == 0:
                    labels[nb] = cid
                    members.add(int(nb))
                    if core[nb]:
                        queue.append(int(nb))
        clusters.append(members)
    noise = {int(i) for i in np.nonzero(labels == 0)[0]}
    return clusters, noise


def extract_mp_center(lm: LabelMap) -> tuple[float, float]:
    """Centroid of the largest-area melt-pool component (8-connectivity).

    Area ties go to the component whose first pixel comes earliest in
    raster order.
    """
    comps = connected_components(lm.class_mask(MELT_POOL), connectivity=8)
    if not comps:
        raise NoMeltPoolError("label map has no melt-pool pixels")
    best = comps[0]
    for comp in comps[1:]:
        if comp.area > best.area:
            best = comp
    return best.centroid


def count_spatters(
    lm: LabelMap,
    params: DbscanParams = DbscanParams(),
    exclude_mp_margin: float | None = 3.0,
) -> tuple[int, list[tuple[float, float]]]:
    """DBSCAN spatter clusters and their centroids from a label map.

    Noise points are not counted. Clusters that come within
    ``exclude_mp_margin`` pixels of the melt-pool region are dropped
    (spatter overlapping the melt pool cannot be resolved and is not
    counted); pass None to disable the exclusion.
    """
    ys, xs = np.nonzero(lm.class_mask(SPATTER))
    if xs.size == 0:
        return 0, []
    pts = np.column_stack([xs, ys]).astype(float)
    clusters, _ = dbscan(pts, params)
    if not clusters:
        return 0, []

    keep = clusters
    if exclude_mp_margin is not None:
        mp_comps = connected_components(lm.class_mask(MELT_POOL), connectivity=8)
        if mp_comps:
            largest = max(mp_comps, key=lambda c: c.area)
            mp_mask = np.zeros(lm.labels.shape, dtype=bool)
            mp_mask[largest.pixels[:, 1], largest.pixels[:, 0]] = True
            dist_to_mp = ndimage.distance_transform_edt(~mp_mask)
            keep = []
            for members in clusters:
                idx = sorted(members)
                d_min = dist_to_mp[ys[idx], xs[idx]].min()
                if d_min > exclude_mp_margin:
                    keep.append(members)

    centroids = []
    for members in keep:
        idx = sorted(members)
        centroids.append((float(xs[idx].mean()), float(ys[idx].mean())))
    return len(keep), centroids


def ejection_angle(
    mp_center: tuple[float, float],
    spatter_centroid: tuple[float, float],
    scan_direction: float,
) -> float:
    """Angle from the scan direction to the spatter displacement, deg in [0, 360)."""
    dx = spatter_centroid[0] - mp_center[0]
    dy = spatter_centroid[1] - mp_center[1]
    if dx == 0.0 and dy == 0.0:
        raise UndefinedAngleError("spatter centroid coincides with melt-pool center")
    return (math.degrees(math.atan2(dy, dx)) - scan_direction) % 360.0


@dataclass
class MPObservation:
    """Registered signature of one monitored melt pool."""

    frame_index: int
    mp_center_mm: tuple[float, float]
    mp_center_px: tuple[float, float]
    spatter_count: int
    ejection_angles: list[float]
    scan_direction: float

    def __post_init__(self):
        if len(self.ejection_angles) != self.spatter_count:
            raise ValueError("ejection_angles length must equal spatter_count")


@dataclass
class LayerSignatureMap:
    """All melt-pool observations of one layer, sorted by frame index."""

    layer_index: int
    observations: list[MPObservation]
    skipped_frames: list[dict] = field(default_factory=list)
    mean_spatter_count: float | None = None
    std_spatter_count: float | None = None

    def __post_init__(self):
        self.observations = sorted(self.observations, key=lambda o: o.frame_index)
        if self.observations:
            counts = np.array([o.spatter_count for o in self.observations], dtype=float)
            self.mean_spatter_count = float(counts.mean())
            self.std_spatter_count = float(counts.std())
        else:
            self.mean_spatter_count = None
            self.std_spatter_count = None

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "layer_index": self.layer_index,
            "mean_spatter_count": self.mean_spatter_count,
            "std_spatter_count": self.std_spatter_count,
            "skipped_frames": self.skipped_frames,
            "observations": [
                {
                    "frame_index": o.frame_index,
                    "mp_center_mm": list(o.mp_center_mm),
                    "mp_center_px": list(o.mp_center_px),
                    "spatter_count": o.spatter_count,
                    "ejection_angles": o.ejection_angles,
                    "scan_direction": o.scan_direction,
                }
                for o in self.observations
            ],
        }

    @staticmethod
    def from_dict(data: dict) -> "LayerSignatureMap":
        if data.get("schema_version") != 1:
            raise ValueError(f"unsupported signature schema {data.get('schema_version')!r}")
        obs = [
            MPObservation(
                frame_index=o["frame_index"],
                mp_center_mm=tuple(o["mp_center_mm"]),
                mp_center_px=tuple(o["mp_center_px"]),
                spatter_count=o["spatter_count"],
                ejection_angles=list(o["ejection_angles"]),
                scan_direction=o["scan_direction"],
            )
            for o in data["observations"]
        ]
        return LayerSignatureMap(
            layer_index=data["layer_index"],
            observations=obs,
            skipped_frames=list(data.get("skipped_frames", [])),
        )


@dataclass
class FrameInput:
    """One frame queued for registration: imagery plus its geometry."""

    frame_index: int
    scan_direction: float
    plate_transform: Homography
    frame: Frame | None = None
    labelmap: LabelMap | None = None

    def __post_init__(self):
        if self.frame is None and self.labelmap is None:
            raise ValueError("frame input needs a frame or a label map")


def register_layer(
    inputs: Sequence[FrameInput],
    layer_index: int,
    segmenter: Callable[[Frame], LabelMap] | None = None,
    params: DbscanParams = DbscanParams(),
    exclude_mp_margin: float | None = 3.0,
) -> LayerSignatureMap:
    """Segment, extract, and register every frame of a layer.

    Frames whose label map has no melt pool are recorded under
    ``skipped_frames`` instead of aborting the layer. The output does not
    depend on input order: observations are assembled sorted by frame index.
    """
    observations: list[MPObservation] = []
    skipped: list[dict] = []
    for item in inputs:
        lm = item.labelmap
        if lm is None:
            if segmenter is None:
                raise ValueError("frames without label maps require a segmenter")
            lm = segmenter(item.frame)
        try:
            center_px = extract_mp_center(lm)
        except NoMeltPoolError as exc:
            skipped.append({"frame_index": item.frame_index, "reason": str(exc)})
            continue
        count, centroids = count_spatters(lm, params, exclude_mp_margin)
        angles = [
            ejection_angle(center_px, c, item.scan_direction) for c in centroids
        ]
        center_mm = item.plate_transform.apply([center_px])[0]
        observations.append(
            MPObservation(
                frame_index=item.frame_index,
                mp_center_mm=(float(center_mm[0]), float(center_mm[1])),
                mp_center_px=center_px,
                spatter_count=count,
                ejection_angles=angles,
                scan_direction=item.scan_direction,
            )
        )
    skipped.sort(key=lambda s: s["frame_index"])
    return LayerSignatureMap(layer_index, observations, skipped)


def layer_aggregate(signature_map: LayerSignatureMap) -> tuple[float, float]:
    """Mean and population standard deviation of spatter counts per melt pool."""
    if not signature_map.observations:
        raise ValueError("cannot aggregate an empty layer signature map")
    counts = np.array([o.spatter_count for o in signature_map.observations], dtype=float)
    return float(counts.mean()), float(counts.std())


@dataclass(frozen=True)
class Histogram:
    """Counts per half-open bin [e_i, e_{i+1}) with out-of-range tallies."""

    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    underflow: int
    overflow: int


def histogram(values: Sequence[float], bin_edges: Sequence[float]) -> Histogram:
    edges = np.asarray(bin_edges, dtype=float)
    if edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise ValueError("bin edges must be strictly increasing with >= 2 entries")
    vals = np.asarray(list(values), dtype=float)
    counts = np.zeros(edges.size - 1, dtype=int)
    underflow = overflow = 0
    if vals.size:
        underflow = int((vals < edges[0]).sum())
        overflow = int((vals >= edges[-1]).sum())
        inside = vals[(vals >= edges[0]) & (vals < edges[-1])]
        idx = np.searchsorted(edges, inside, side="right") - 1
        for i in idx:
            counts[i] += 1
    return Histogram(tuple(edges), tuple(int(c) for c in counts), underflow, overflow)


def write_signature_json(path: str | Path, signature_map: LayerSignatureMap) -> None:
    dump_json(signature_map.to_dict(), path)


def read_signature_json(path: str | Path) -> LayerSignatureMap:
    return LayerSignatureMap.from_dict(load_json(path))


def write_signature_csv(path: str | Path, signature_map: LayerSignatureMap) -> None:
    """Flattened per-observation rows; ejection angles joined by ';'."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["layer", "frame", "mp_x_mm", "mp_y_mm", "count", "angles_deg"])
        for o in signature_map.observations:
            writer.writerow(
                [
                    signature_map.layer_index,
                    o.frame_index,
                    f"{o.mp_center_mm[0]:.4f}",
                    f"{o.mp_center_mm[1]:.4f}",
                    o.spatter_count,
                    ";".join(f"{a:.2f}" for a in o.ejection_angles),
                ]
            )
