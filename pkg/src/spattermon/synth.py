"""Deterministic synthetic off-axis camera scenes with exact ground truth.

Real monitoring footage is machine-bound, so the registration pipeline is
verified on rendered scenes instead: a Gaussian melt-pool blob (clipped at
3 sigma, so its labeled support is a disk of ``mp_radius``), uniform
intensity spatter disks, an optional lens-flare column of vertically
collinear spots, and Gaussian background noise. The label map marks the
exact rendered support of the melt pool (class 1) and spatters (class 2);
flare pixels stay class 0 because flare is sensor noise, not ejecta.

Placement keeps every spatter disk at least ``2 * SEPARATION_EPS`` away
from the melt-pool boundary, other spatters, and flare spots, and never
stacks three spatters in one narrow image column, so the ground-truth count
is unambiguous for the downstream clustering defaults.

Determinism contract (all draws from :class:`~spattermon.rng.Xorshift64Star`
seeded with ``rng_seed``):

1. For each spatter in order: ejection angle ``normal(mean, spread)``
   (two uniforms), distance ``uniform(d_min, d_max)``, radius
   ``uniform(*radius_range)``, intensity ``uniform(*intensity_range)``;
   rejected candidates consume their draws and are redrawn. The attempt
   budget is ``10 * spatter_count``.
2. The background noise field, when ``background_noise_sigma > 0``, is one
   ``normal_block(width * height)`` reshaped row-major.

Layer sequences place one scene per melt-pool sample along a serpentine
hatch path. Per-frame spatter counts follow a documented linear model in
laser power and scan speed (see ``COUNT_MODEL``) with zero-mean, right-
skewed noise; substreams are derived with ``derive_seed(layer_seed, 2*i)``
for the count draw and ``derive_seed(layer_seed, 2*i + 1)`` for the scene.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .imaging import MELT_POOL, SPATTER, Frame, Homography, LabelMap
from .registration import DbscanParams, ejection_angle
from .rng import Xorshift64Star, derive_seed

SEPARATION_EPS = DbscanParams().eps

# Mean spatter count per melt pool: a*P + c*V + b (P in W, V in mm/s),
# anchored to measured per-layer averages over a power sweep at 1 m/s and
# matching the measured count-vs-speed slope of -4 per m/s.
COUNT_MODEL = {
    "power_coeff": 0.0188,
    "speed_coeff": -0.004,
    "intercept": 1.68,
    "noise_gauss_sigma": 0.6,
    "noise_tail_scale": 0.35,
    "max_count": 10,
}


class SceneInfeasibleError(RuntimeError):
    """Raised when the placement solver cannot fit the requested spatters."""


@dataclass(frozen=True)
class FlareSpec:
    """A vertical run of bright sensor-artifact spots in one image column."""

    column_x: float
    spot_count: int = 4
    spot_spacing: float = 22.0
    spot_intensity: float = 180.0
    spot_radius: float = 2.0

    def __post_init__(self):
        if self.spot_count < 1:
            raise ValueError("flare needs at least one spot")
        if self.spot_spacing <= 0 or self.spot_radius <= 0:
            raise ValueError("flare spacing and radius must be positive")

    def spot_centers(self, image_height: int) -> list[tuple[float, float]]:
        y0 = (image_height - 1) / 2.0 - (self.spot_count - 1) * self.spot_spacing / 2.0
        return [(self.column_x, y0 + i * self.spot_spacing) for i in range(self.spot_count)]


@dataclass(frozen=True)
class SceneSpec:
    """Full description of one synthetic melt-pool frame."""

    image_size: tuple[int, int] = (256, 256)
    mp_center: tuple[float, float] | None = None
    mp_radius: float = 12.0
    mp_peak_intensity: float = 255.0
    scan_direction: float = 0.0
    spatter_count: int = 3
    spatter_angle_distribution: tuple[float, float] = (180.0, 50.0)
    spatter_radius_range: tuple[float, float] = (2.0, 4.0)
    spatter_intensity_range: tuple[float, float] = (120.0, 180.0)
    flare: FlareSpec | None = None
    background_noise_sigma: float = 8.0
    rng_seed: int = 1

    def __post_init__(self):
        w, h = self.image_size
        if w < 16 or h < 16:
            raise ValueError("image must be at least 16x16")
        if self.mp_center is None:
            object.__setattr__(self, "mp_center", ((w - 1) / 2.0, (h - 1) / 2.0))
        cx, cy = self.mp_center
        r = self.mp_radius
        if r <= 0:
            raise ValueError("mp_radius must be positive")
        if not (r <= cx <= w - 1 - r and r <= cy <= h - 1 - r):
            raise ValueError("melt pool must lie inside the image bounds")
        if self.spatter_count < 0:
            raise ValueError("spatter_count must be >= 0")
        lo, hi = self.spatter_radius_range
        if lo < 1.0 or hi < lo:
            raise ValueError("spatter radii must satisfy 1 <= lo <= hi")
        if self.background_noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")


@dataclass(frozen=True)
class GroundTruth:
    """Oracle record for one scene: what the registration stage must find."""

    mp_center: tuple[float, float]
    spatter_centroids: list[tuple[float, float]]
    spatter_count: int
    ejection_angles: list[float]

    def __post_init__(self):
        if not (len(self.spatter_centroids) == self.spatter_count == len(self.ejection_angles)):
            raise ValueError("ground truth centroid/count/angle lengths disagree")

    def to_dict(self) -> dict:
        return {
            "mp_center": list(self.mp_center),
            "spatter_centroids": [list(c) for c in self.spatter_centroids],
            "spatter_count": self.spatter_count,
            "ejection_angles": self.ejection_angles,
        }

    @staticmethod
    def from_dict(data: dict) -> "GroundTruth":
        return GroundTruth(
            mp_center=tuple(data["mp_center"]),
            spatter_centroids=[tuple(c) for c in data["spatter_centroids"]],
            spatter_count=data["spatter_count"],
            ejection_angles=list(data["ejection_angles"]),
        )


def _disk_pixels(center: tuple[float, float], radius: float, w: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    cx, cy = center
    x0 = max(0, int(math.floor(cx - radius)))
    x1 = min(w - 1, int(math.ceil(cx + radius)))
    y0 = max(0, int(math.floor(cy - radius)))
    y1 = min(h - 1, int(math.ceil(cy + radius)))
    xs, ys = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius
    return xs[inside], ys[inside]


def _place_spatters(spec: SceneSpec, rng: Xorshift64Star) -> list[tuple[float, float, float, float]]:
    """Draw (cx, cy, radius, intensity) tuples honoring all separation rules."""
    if spec.spatter_count == 0:
        return []
    w, h = spec.image_size
    mean_ang, spread_ang = spec.spatter_angle_distribution
    gap = 2.0 * SEPARATION_EPS
    d_max = 0.45 * min(w, h)
    flare_spots = spec.flare.spot_centers(h) if spec.flare else []
    flare_x = spec.flare.column_x if spec.flare else None

    placed: list[tuple[float, float, float, float]] = []
    budget = 10 * spec.spatter_count
    while len(placed) < spec.spatter_count:
        if budget == 0:
            raise SceneInfeasibleError(
                f"could not place spatter {len(placed) + 1}/{spec.spatter_count} "
                f"within {10 * spec.spatter_count} attempts"
            )
        budget -= 1
        psi = rng.normal(mean_ang, spread_ang)
        radius = rng.uniform(*spec.spatter_radius_range)
        d_min = spec.mp_radius + radius + gap
        dist = rng.uniform(d_min, max(d_min + 1.0, d_max))
        intensity = rng.uniform(*spec.spatter_intensity_range)
        theta = math.radians(spec.scan_direction + psi)
        cx = spec.mp_center[0] + dist * math.cos(theta)
        cy = spec.mp_center[1] + dist * math.sin(theta)

        if not (radius + 1 <= cx <= w - 2 - radius and radius + 1 <= cy <= h - 2 - radius):
            continue
        if math.hypot(cx - spec.mp_center[0], cy - spec.mp_center[1]) < d_min:
            continue
        if any(
            math.hypot(cx - px, cy - py) < radius + pr + gap for px, py, pr, _ in placed
        ):
            continue
        if flare_spots:
            if abs(cx - flare_x) < spec.flare.spot_radius + radius + gap:
                continue
            if any(
                math.hypot(cx - fx, cy - fy) < radius + spec.flare.spot_radius + gap
                for fx, fy in flare_spots
            ):
                continue
        # Never allow three spatters in one narrow column, or the flare
        # suppression heuristic could swallow a real spatter.
        if sum(1 for px, _, _, _ in placed if abs(px - cx) <= 4.0) >= 2:
            continue
        placed.append((cx, cy, radius, intensity))
    return placed


def synth_frame(spec: SceneSpec) -> tuple[Frame, LabelMap, GroundTruth]:
    """Render one scene; identical spec (incl. seed) gives identical bytes."""
    w, h = spec.image_size
    rng = Xorshift64Star(spec.rng_seed)
    spatters = _place_spatters(spec, rng)

    image = np.zeros((h, w), dtype=float)
    labels = np.zeros((h, w), dtype=np.uint8)

    if spec.background_noise_sigma > 0:
        noise = np.array(rng.normal_block(w * h), dtype=float).reshape(h, w)
        image += spec.background_noise_sigma * noise

    # Melt pool: Gaussian blob clipped at 3 sigma; support radius == mp_radius.
    sigma = spec.mp_radius / 3.0
    xs, ys = _disk_pixels(spec.mp_center, spec.mp_radius, w, h)
    r2 = (xs - spec.mp_center[0]) ** 2 + (ys - spec.mp_center[1]) ** 2
    image[ys, xs] += spec.mp_peak_intensity * np.exp(-r2 / (2.0 * sigma * sigma))
    labels[ys, xs] = MELT_POOL

    centroids: list[tuple[float, float]] = []
    for cx, cy, radius, intensity in spatters:
        sxs, sys = _disk_pixels((cx, cy), radius, w, h)
        image[sys, sxs] += intensity
        labels[sys, sxs] = SPATTER
        centroids.append((float(sxs.mean()), float(sys.mean())))

    if spec.flare is not None:
        for fx, fy in spec.flare.spot_centers(h):
            fxs, fys = _disk_pixels((fx, fy), spec.flare.spot_radius, w, h)
            image[fys, fxs] += spec.flare.spot_intensity
            # Flare stays class 0: it is sensor noise, not ejecta.

    frame = Frame(np.clip(np.rint(image), 0, 255).astype(np.uint8))
    angles = [ejection_angle(spec.mp_center, c, spec.scan_direction) for c in centroids]
    truth = GroundTruth(
        mp_center=spec.mp_center,
        spatter_centroids=centroids,
        spatter_count=len(centroids),
        ejection_angles=angles,
    )
    return frame, LabelMap(labels), truth


def mean_spatter_count(power_w: float, speed_mm_s: float) -> float:
    """Documented linear count model, clamped at zero."""
    m = (
        COUNT_MODEL["power_coeff"] * power_w
        + COUNT_MODEL["speed_coeff"] * speed_mm_s
        + COUNT_MODEL["intercept"]
    )
    return max(0.0, m)


def draw_spatter_count(rng: Xorshift64Star, power_w: float, speed_mm_s: float) -> int:
    """One integer count draw: round(max(0, model mean + skewed noise))."""
    noise = rng.normal(0.0, COUNT_MODEL["noise_gauss_sigma"])
    noise += COUNT_MODEL["noise_tail_scale"] * (rng.exponential() - 1.0)
    value = mean_spatter_count(power_w, speed_mm_s) + noise
    return min(COUNT_MODEL["max_count"], int(math.floor(max(0.0, value) + 0.5)))


@dataclass(frozen=True)
class LayerSceneSpec:
    """A layer's worth of scenes along a serpentine hatch path."""

    layer_index: int
    hatch_angle: float
    hatch_space_mm: float
    bounds_mm: tuple[float, float, float, float]  # x0, y0, x1, y1
    power_w: float = 250.0
    speed_mm_s: float = 1000.0
    sample_spacing_mm: float = 1.0
    mm_per_px: float = 0.05
    scene: SceneSpec = field(default_factory=lambda: SceneSpec(spatter_count=0))
    rng_seed: int = 1

    def __post_init__(self):
        x0, y0, x1, y1 = self.bounds_mm
        if x1 < x0 or y1 < y0:
            raise ValueError("bounding rectangle has negative extent")
        if self.hatch_space_mm <= 0 or self.sample_spacing_mm <= 0:
            raise ValueError("hatch spacing and sample spacing must be positive")
        if self.mm_per_px <= 0:
            raise ValueError("mm_per_px must be positive")


@dataclass
class LayerFrame:
    """One rendered sample of a layer sequence with its plate geometry."""

    frame: Frame
    labelmap: LabelMap
    ground_truth: GroundTruth
    frame_index: int
    mp_plate_position: tuple[float, float]
    scan_direction: float
    plate_transform: Homography


def _hatch_path(layer: LayerSceneSpec) -> list[tuple[float, float, float]]:
    """Melt-pool sample positions (x_mm, y_mm, scan_direction_deg)."""
    x0, y0, x1, y1 = layer.bounds_mm
    if x1 == x0 or y1 == y0:
        return []
    theta = math.radians(layer.hatch_angle % 180.0)
    ux, uy = math.cos(theta), math.sin(theta)
    nx, ny = -uy, ux
    corners = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
    offsets = [cx * nx + cy * ny for cx, cy in corners]
    o_lo, o_hi = min(offsets), max(offsets)

    samples: list[tuple[float, float, float]] = []
    line = 0
    o = o_lo + 0.5 * layer.hatch_space_mm
    while o < o_hi:
        # Clip the infinite hatch line p(t) = o*n + t*u against the rectangle.
        t_lo, t_hi = -math.inf, math.inf
        for base, direction, lo, hi in (
            (o * nx, ux, x0, x1),
            (o * ny, uy, y0, y1),
        ):
            if abs(direction) < 1e-12:
                if not (lo - 1e-9 <= base <= hi + 1e-9):
                    t_lo, t_hi = math.inf, -math.inf
                continue
            ta = (lo - base) / direction
            tb = (hi - base) / direction
            t_lo = max(t_lo, min(ta, tb))
            t_hi = min(t_hi, max(ta, tb))
        if t_hi > t_lo:
            span = t_hi - t_lo
            count = int(math.floor(span / layer.sample_spacing_mm))
            ts = [t_lo + (j + 0.5) * layer.sample_spacing_mm for j in range(count)]
            if line % 2 == 1:
                ts.reverse()
            direction_deg = (layer.hatch_angle + (180.0 if line % 2 == 1 else 0.0)) % 360.0
            for t in ts:
                samples.append((o * nx + t * ux, o * ny + t * uy, direction_deg))
        line += 1
        o += layer.hatch_space_mm
    return samples


def synth_layer_sequence(layer: LayerSceneSpec) -> list[LayerFrame]:
    """Render one scene per melt-pool sample along the layer's hatch path."""
    samples = _hatch_path(layer)
    out: list[LayerFrame] = []
    for i, (px_mm, py_mm, direction_deg) in enumerate(samples):
        count_rng = Xorshift64Star(derive_seed(layer.rng_seed, 2 * i))
        count = draw_spatter_count(count_rng, layer.power_w, layer.speed_mm_s)
        spec = replace(
            layer.scene,
            spatter_count=count,
            scan_direction=direction_deg,
            rng_seed=derive_seed(layer.rng_seed, 2 * i + 1),
        )
        frame, labelmap, truth = synth_frame(spec)
        s = layer.mm_per_px
        transform = Homography.scale_translate(
            s,
            px_mm - s * spec.mp_center[0],
            py_mm - s * spec.mp_center[1],
        )
        out.append(
            LayerFrame(
                frame=frame,
                labelmap=labelmap,
                ground_truth=truth,
                frame_index=i,
                mp_plate_position=(px_mm, py_mm),
                scan_direction=direction_deg,
                plate_transform=transform,
            )
        )
    return out
