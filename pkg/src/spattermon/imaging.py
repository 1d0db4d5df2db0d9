"""Frames, label maps, perspective correction, and low-level raster ops.

The off-axis camera views the build plate at an angle; a planar homography
estimated from four point correspondences undoes that distortion before any
melt-pool geometry is measured. The remaining helpers (connected components,
intensity thresholding) are the raster primitives the segmentation and
registration stages build on.

Pixel coordinates are (x, y) with x along columns and y along rows; arrays
are indexed [y, x]. Angles follow atan2(dy, dx) on those axes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

BACKGROUND = 0
MELT_POOL = 1
SPATTER = 2

_LABEL_VALUES = (BACKGROUND, MELT_POOL, SPATTER)


class SingularConfigurationError(ValueError):
    """Raised when homography correspondences are degenerate."""


@dataclass
class Frame:
    """8-bit grayscale image plus acquisition metadata.

    ``pixels`` is a (height, width) uint8 array. ``plate_transform`` maps
    pixel coordinates to build-plate millimetres when known.
    """

    pixels: np.ndarray
    frame_index: int = 0
    timestamp: float = 0.0
    plate_transform: "Homography | None" = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError("frame pixels must be a 2-D array")
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255):
                raise ValueError("frame intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class LabelMap:
    """Per-pixel class map: 0 background, 1 melt pool (+plume), 2 spatter."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError("label map must be a 2-D array")
        if lab.size and not np.isin(lab, _LABEL_VALUES).all():
            bad = sorted(set(np.unique(lab)) - set(_LABEL_VALUES))
            raise ValueError(f"label map contains invalid class values {bad}")
        self.labels = lab.astype(np.uint8)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def class_mask(self, value: int) -> np.ndarray:
        return self.labels == value


@dataclass(frozen=True)
class Homography:
    """3x3 projective transform, normalized so matrix[2, 2] == 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(m[2, 2]) < 1e-12:
            raise SingularConfigurationError("homography has zero scale entry")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-12:
            raise SingularConfigurationError("homography is not invertible")
        object.__setattr__(self, "matrix", m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (n, 2) pixel points through the transform."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ones = np.ones((pts.shape[0], 1))
        hom = np.hstack([pts, ones]) @ self.matrix.T
        return hom[:, :2] / hom[:, 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    @staticmethod
    def identity() -> "Homography":
        return Homography(np.eye(3))

    @staticmethod
    def translation(tx: float, ty: float) -> "Homography":
        return Homography(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]]))

    @staticmethod
    def scale_translate(s: float, tx: float = 0.0, ty: float = 0.0) -> "Homography":
        return Homography(np.array([[s, 0.0, tx], [0.0, s, ty], [0.0, 0.0, 1.0]]))

    def to_json(self) -> str:
        return json.dumps({"matrix": [float(v) for v in self.matrix.ravel()]})

    @staticmethod
    def from_json(text: str) -> "Homography":
        values = json.loads(text)["matrix"]
        if len(values) != 9:
            raise ValueError("homography JSON must hold 9 numbers, row-major")
        return Homography(np.array(values, dtype=float).reshape(3, 3))


def _any_three_collinear(points: np.ndarray, tol: float = 1e-9) -> bool:
    scale = max(1.0, float(np.abs(points).max()))
    for i in range(4):
        for j in range(i + 1, 4):
            for k in range(j + 1, 4):
                a, b, c = points[i], points[j], points[k]
                cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
                if abs(cross) <= tol * scale * scale:
                    return True
    return False


def estimate_homography(src: Sequence[Sequence[float]], dst: Sequence[Sequence[float]]) -> Homography:
    """Solve the exact 4-point perspective transform.

    Each correspondence (x, y) -> (u, v) contributes the two rows of the
    standard direct-linear system in the eight unknowns h11..h32 (h33 is
    fixed at 1), giving an 8x8 linear solve.
    """
    s = np.asarray(src, dtype=float)
    d = np.asarray(dst, dtype=float)
    if s.shape != (4, 2) or d.shape != (4, 2):
        raise ValueError("need exactly 4 source and 4 destination points")
    if _any_three_collinear(s) or _any_three_collinear(d):
        raise SingularConfigurationError("three correspondence points are collinear")

    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        x, y = s[i]
        u, v = d[i]
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        h = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularConfigurationError("degenerate point configuration") from exc
    return Homography(np.append(h, 1.0).reshape(3, 3))


def load_correspondences_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read calibration points from CSV rows ``x_src,y_src,x_dst,y_dst``."""
    rows = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if rows.shape[1] != 4:
        raise ValueError("correspondence CSV needs 4 columns: x_src,y_src,x_dst,y_dst")
    return rows[:, :2].copy(), rows[:, 2:].copy()


def warp(frame: Frame, h: Homography, out_size: tuple[int, int]) -> Frame:
    """Resample ``frame`` under ``h`` by inverse-mapped bilinear interpolation.

    ``out_size`` is (width, height). Samples falling outside the source
    image contribute 0.
    """
    out_w, out_h = int(out_size[0]), int(out_size[1])
    inv = np.linalg.inv(h.matrix)

    xs, ys = np.meshgrid(np.arange(out_w, dtype=float), np.arange(out_h, dtype=float))
    ones = np.ones_like(xs)
    denom = inv[2, 0] * xs + inv[2, 1] * ys + inv[2, 2] * ones
    sx = (inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]) / denom
    sy = (inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]) / denom

    src = frame.pixels.astype(float)
    h_src, w_src = src.shape
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0

    def sample(ix, iy):
        inside = (ix >= 0) & (ix < w_src) & (iy >= 0) & (iy < h_src)
        vals = np.zeros_like(sx)
        vals[inside] = src[iy[inside].astype(int), ix[inside].astype(int)]
        return vals

    v00 = sample(x0, y0)
    v10 = sample(x0 + 1, y0)
    v01 = sample(x0, y0 + 1)
    v11 = sample(x0 + 1, y0 + 1)
    out = (
        v00 * (1 - fx) * (1 - fy)
        + v10 * fx * (1 - fy)
        + v01 * (1 - fx) * fy
        + v11 * fx * fy
    )
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return Frame(out, frame_index=frame.frame_index, timestamp=frame.timestamp)


@dataclass
class Component:
    """One connected region: 1-based label, pixel area, centroid (x, y)."""

    label: int
    area: int
    centroid: tuple[float, float]
    pixels: np.ndarray = field(repr=False)


def connected_components(mask: np.ndarray, connectivity: int = 8) -> list[Component]:
    """Label a binary mask into components in raster-scan order.

    Components are numbered by the raster position of their first pixel, so
    labeling is deterministic. Centroids are plain means of member pixel
    (x, y) coordinates.
    """
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    mask = np.asarray(mask).astype(bool)
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    raw, count = ndimage.label(mask, structure=structure)
    if count == 0:
        return []

    # Renumber so label order follows each component's first raster pixel.
    flat = raw.ravel()
    nonzero = np.flatnonzero(flat)
    uniq, first_idx = np.unique(flat[nonzero], return_index=True)
    encounter = uniq[np.argsort(first_idx)]
    remap = np.zeros(count + 1, dtype=int)
    remap[encounter] = np.arange(1, count + 1)
    labeled = remap[raw]

    components: list[Component] = []
    ys, xs = np.nonzero(labeled)
    labs = labeled[ys, xs]
    for lab in range(1, count + 1):
        sel = labs == lab
        px = np.column_stack([xs[sel], ys[sel]])
        components.append(
            Component(
                label=lab,
                area=int(px.shape[0]),
                centroid=(float(px[:, 0].mean()), float(px[:, 1].mean())),
                pixels=px,
            )
        )
    return components


def threshold_segment(frame: Frame, t_mp: float, t_spatter: float) -> LabelMap:
    """Raw two-threshold labeling: >= t_mp melt pool, [t_spatter, t_mp) spatter.

    This is the pre-suppression labeling; flare artifacts land in the spatter
    band and must be removed downstream.
    """
    if not t_mp > t_spatter:
        raise ValueError("t_mp must be greater than t_spatter")
    px = frame.pixels
    labels = np.zeros(px.shape, dtype=np.uint8)
    labels[px >= t_spatter] = SPATTER
    labels[px >= t_mp] = MELT_POOL
    return LabelMap(labels)
