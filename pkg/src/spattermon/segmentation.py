"""Three-class segmentation: ingestion, reference heuristic, baselines, metrics.

Externally produced label maps (e.g. from a neural segmenter) enter through
:func:`ingest_labelmap`. The built-in reference segmenter thresholds
intensities and then removes lens-flare artifacts, which show up as a
vertical run of bright spots sharing one image column. The K-means
segmenter reproduces the classic intensity-clustering baseline, including
its failure mode of calling flare spots spatter.

Also here: the cross-entropy and pixel-accuracy metrics used to score any
segmenter against ground truth, and the dilated (atrous) convolution
primitive.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import (
    BACKGROUND,
    MELT_POOL,
    SPATTER,
    Frame,
    LabelMap,
    connected_components,
    threshold_segment,
)
from .pgmio import FormatError, read_labelmap


class DegenerateInputError(ValueError):
    """Raised when clustering input cannot support the requested K."""


class SizeMismatchError(ValueError):
    """Raised when paired rasters disagree on dimensions."""


@dataclass(frozen=True)
class SegmenterConfig:
    """Thresholds and flare-suppression knobs for the reference segmenter.

    A spatter-labeled component is treated as flare when at least
    ``flare_k - 1`` other spatter components have centroids within
    ``flare_tol_x`` pixels of its centroid x (vertical collinearity).
    """

    t_mp: float = 200.0
    t_spatter: float = 100.0
    flare_k: int = 3
    flare_tol_x: float = 1.5


def ingest_labelmap(path, paired_frame: Frame | None = None) -> LabelMap:
    """Load and validate an externally produced label map (PGM P5, values 0-2)."""
    lm = read_labelmap(path)
    if paired_frame is not None and (
        lm.width != paired_frame.width or lm.height != paired_frame.height
    ):
        raise SizeMismatchError(
            f"label map {lm.width}x{lm.height} does not match frame "
            f"{paired_frame.width}x{paired_frame.height}"
        )
    return lm


def suppress_flare(lm: LabelMap, flare_k: int = 3, flare_tol_x: float = 1.5) -> LabelMap:
    """Relabel vertically collinear spatter components as background."""
    comps = connected_components(lm.class_mask(SPATTER), connectivity=8)
    if not comps:
        return LabelMap(lm.labels.copy())
    xs = np.array([c.centroid[0] for c in comps])
    labels = lm.labels.copy()
    for i, comp in enumerate(comps):
        aligned = np.abs(xs - xs[i]) <= flare_tol_x
        if int(aligned.sum()) - 1 >= flare_k - 1:
            labels[comp.pixels[:, 1], comp.pixels[:, 0]] = BACKGROUND
    return LabelMap(labels)


def reference_segment(frame: Frame, cfg: SegmenterConfig = SegmenterConfig()) -> LabelMap:
    """Threshold segmentation followed by flare suppression."""
    raw = threshold_segment(frame, cfg.t_mp, cfg.t_spatter)
    return suppress_flare(raw, cfg.flare_k, cfg.flare_tol_x)


def kmeans_segment(frame: Frame, k: int = 3, seed: int = 0) -> LabelMap:
    """1-D intensity K-means baseline (K = 3 or 4).

    Centers start at the sorted intensity quantiles (q = (j + 0.5) / K) and
    Lloyd iterations run on the 256-bin intensity histogram, so the result
    is deterministic and invariant to pixel order. Clusters map to classes
    by mean intensity: lowest is background, highest is melt pool, and the
    middle cluster(s) are spatter. ``seed`` is accepted for interface
    stability; the algorithm involves no random draws.
    """
    if k not in (3, 4):
        raise ValueError("K must be 3 or 4")
    px = frame.pixels
    hist = np.bincount(px.ravel(), minlength=256).astype(float)
    levels = np.arange(256, dtype=float)
    present = hist > 0
    if int(present.sum()) < k:
        raise DegenerateInputError(
            f"need at least {k} distinct intensity levels, found {int(present.sum())}"
        )

    # Quantile initialization over the pixel intensity distribution.
    cumulative = np.cumsum(hist)
    total = cumulative[-1]
    centers = np.empty(k)
    for j in range(k):
        target = (j + 0.5) / k * total
        centers[j] = levels[np.searchsorted(cumulative, target, side="left")]

    assign = np.full(256, -1)
    for _ in range(100):
        dist = np.abs(levels[:, None] - centers[None, :])
        new_assign = np.argmin(dist, axis=1)
        # Keep empty clusters alive: move them to the occupied level that is
        # farthest from its current center (deterministic repair).
        counts = np.array(
            [hist[(new_assign == j) & present].sum() for j in range(k)]
        )
        gaps = np.where(present, dist[np.arange(256), new_assign], -1.0)
        for j in np.nonzero(counts == 0)[0]:
            far_level = int(np.argmax(gaps))
            new_assign[far_level] = j
            gaps[far_level] = -1.0
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            sel = (assign == j) & present
            weight = hist[sel].sum()
            if weight > 0:
                centers[j] = (levels[sel] * hist[sel]).sum() / weight

    # Rank clusters by mean intensity; middles map to spatter.
    order = np.argsort(centers, kind="stable")
    class_of_cluster = np.empty(k, dtype=np.uint8)
    class_of_cluster[order[0]] = BACKGROUND
    class_of_cluster[order[-1]] = MELT_POOL
    for mid in order[1:-1]:
        class_of_cluster[mid] = SPATTER
    lut = class_of_cluster[assign]
    return LabelMap(lut[px])


@dataclass
class ClassProbabilities:
    """Per-pixel probability vectors over the 3 classes, shape (h, w, 3)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError("probabilities must have shape (h, w, 3)")
        if p.size:
            if p.min() < 0:
                raise ValueError("probabilities must be non-negative")
            sums = p.sum(axis=2)
            if np.abs(sums - 1.0).max() > 1e-9:
                raise ValueError("probability vectors must sum to 1 within 1e-9")
        self.probs = p

    @staticmethod
    def one_hot(lm: LabelMap) -> "ClassProbabilities":
        p = np.zeros((lm.height, lm.width, 3))
        for c in (BACKGROUND, MELT_POOL, SPATTER):
            p[:, :, c] = lm.labels == c
        return ClassProbabilities(p)


def cross_entropy(pred: ClassProbabilities, truth: LabelMap) -> float:
    """Mean per-pixel cross entropy (natural log) of predictions vs truth.

    Returns +inf when any pixel assigns zero probability to its true class.
    """
    p = pred.probs
    if p.shape[:2] != truth.labels.shape:
        raise SizeMismatchError("prediction and truth dimensions differ")
    ys, xs = np.indices(truth.labels.shape)
    p_true = p[ys, xs, truth.labels]
    if (p_true == 0).any():
        return math.inf
    return float(np.mean(-np.log(p_true)))


def pixel_accuracy(pred: LabelMap, truth: LabelMap) -> float:
    """Fraction of pixels whose class matches the ground truth."""
    if pred.labels.shape != truth.labels.shape:
        raise SizeMismatchError("prediction and truth dimensions differ")
    if pred.labels.size == 0:
        return 1.0
    return float(np.mean(pred.labels == truth.labels))


def write_evaluation_csv(path, rows) -> None:
    """Write per-frame evaluation rows: (frame_index, accuracy, cross_entropy)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_index", "accuracy", "cross_entropy"])
        for frame_index, accuracy, ce in rows:
            writer.writerow([frame_index, f"{accuracy:.6f}", f"{ce:.6f}"])


@dataclass(frozen=True)
class DilatedKernel:
    """Convolution weights applied at an integer dilation rate."""

    weights: np.ndarray
    rate: int = 1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim not in (1, 2):
            raise ValueError("kernel must be 1-D or 2-D")
        if self.rate < 1:
            raise ValueError("dilation rate must be >= 1")
        if w.ndim == 2 and any(n % 2 == 0 for n in w.shape):
            raise ValueError("2-D kernels must have odd extents")
        object.__setattr__(self, "weights", w)


def dilated_conv(x: np.ndarray, kern: DilatedKernel) -> np.ndarray:
    """Valid-mode dilated convolution: y_i = sum_k x[i + r*k] * w[k].

    The kernel is applied as written (no flip), with taps spaced ``rate``
    samples apart. For 2-D inputs the same rule applies along both axes.
    """
    x = np.asarray(x, dtype=float)
    w = kern.weights
    r = kern.rate
    if x.ndim != w.ndim:
        raise ValueError("input and kernel dimensionality must match")
    if x.ndim == 1:
        span = r * (w.shape[0] - 1) + 1
        if x.shape[0] < span:
            raise ValueError(f"input length {x.shape[0]} shorter than kernel span {span}")
        n_out = x.shape[0] - r * (w.shape[0] - 1)
        y = np.zeros(n_out)
        for k in range(w.shape[0]):
            y += w[k] * x[r * k : r * k + n_out]
        return y
    span_y = r * (w.shape[0] - 1) + 1
    span_x = r * (w.shape[1] - 1) + 1
    if x.shape[0] < span_y or x.shape[1] < span_x:
        raise ValueError("input smaller than dilated kernel span")
    out_h = x.shape[0] - r * (w.shape[0] - 1)
    out_w = x.shape[1] - r * (w.shape[1] - 1)
    y = np.zeros((out_h, out_w))
    for ky in range(w.shape[0]):
        for kx in range(w.shape[1]):
            y += w[ky, kx] * x[r * ky : r * ky + out_h, r * kx : r * kx + out_w]
    return y
