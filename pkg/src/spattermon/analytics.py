"""Descriptive statistics, fits, and report emission for layer studies.

Collects the per-layer feature records (process setting, registered spatter
average, measured roughness), fits the count-versus-parameter regression
lines, computes prediction error metrics, orders records into the
roughness-versus-energy-density regime curve, and renders the whole bundle
as CSV tables plus SVG plots with byte-stable output.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import ProcessParameters, compute_ved
from .registration import Histogram, LayerSignatureMap, histogram
from .svgplot import SvgPlot, make_axes

VED_CONSISTENCY_TOL = 0.005


@dataclass(frozen=True)
class LayerFeatureRecord:
    """One (bar, layer) sample: process inputs plus monitored outputs."""

    bar_id: int
    layer_index: int
    power_w: float
    speed_mm_s: float
    hatch_space_mm: float
    layer_thickness_mm: float
    ved: float
    hatch_angle_deg: float
    mean_spatter_count: float
    sa_um: float
    sa_z_std_um: float = 0.0

    def __post_init__(self):
        p = ProcessParameters(
            self.power_w, self.speed_mm_s, self.hatch_space_mm, self.layer_thickness_mm
        )
        expected = compute_ved(p)
        if expected > 0 and abs(self.ved - expected) / expected > VED_CONSISTENCY_TOL:
            raise ValueError(
                f"ved {self.ved:.4g} inconsistent with parameters (expected {expected:.4g})"
            )


FEATURE_CSV_COLUMNS = [
    "bar_id",
    "layer_index",
    "power_w",
    "speed_mm_s",
    "hatch_space_mm",
    "layer_thickness_mm",
    "ved",
    "hatch_angle_deg",
    "mean_spatter_count",
    "sa_um",
    "sa_z_std_um",
]


class MissingColumnError(ValueError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"feature CSV is missing required column {column!r}")


def write_feature_csv(path: str | Path, records: Sequence[LayerFeatureRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURE_CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.bar_id,
                    r.layer_index,
                    f"{r.power_w:g}",
                    f"{r.speed_mm_s:g}",
                    f"{r.hatch_space_mm:g}",
                    f"{r.layer_thickness_mm:g}",
                    f"{r.ved:.6f}",
                    f"{r.hatch_angle_deg:.4f}",
                    f"{r.mean_spatter_count:.6f}",
                    f"{r.sa_um:.6f}",
                    f"{r.sa_z_std_um:.6f}",
                ]
            )


def read_feature_csv(path: str | Path) -> list[LayerFeatureRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fieldnames = reader.fieldnames or []
        for col in FEATURE_CSV_COLUMNS[:-1]:  # sa_z_std_um is optional
            if col not in fieldnames:
                raise MissingColumnError(col)
        records = []
        for row in reader:
            records.append(
                LayerFeatureRecord(
                    bar_id=int(row["bar_id"]),
                    layer_index=int(row["layer_index"]),
                    power_w=float(row["power_w"]),
                    speed_mm_s=float(row["speed_mm_s"]),
                    hatch_space_mm=float(row["hatch_space_mm"]),
                    layer_thickness_mm=float(row["layer_thickness_mm"]),
                    ved=float(row["ved"]),
                    hatch_angle_deg=float(row["hatch_angle_deg"]),
                    mean_spatter_count=float(row["mean_spatter_count"]),
                    sa_um=float(row["sa_um"]),
                    sa_z_std_um=float(row.get("sa_z_std_um", 0.0) or 0.0),
                )
            )
    return records


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    n: int


def linfit(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    """Ordinary least squares line via the normal equations.

    R^2 = 1 - SS_res / SS_tot; when all targets are equal (SS_tot == 0) and
    the fit is exact, R^2 is reported as 1.
    """
    xv = np.asarray(list(x), dtype=float)
    yv = np.asarray(list(y), dtype=float)
    n = xv.size
    if n < 2 or n != yv.size:
        raise ValueError("linfit needs >= 2 paired samples")
    sxx = n * float((xv * xv).sum()) - float(xv.sum()) ** 2
    if sxx == 0.0:
        raise ValueError("x values are all equal; slope is undefined")
    sxy = n * float((xv * yv).sum()) - float(xv.sum()) * float(yv.sum())
    slope = sxy / sxx
    intercept = (float(yv.sum()) - slope * float(xv.sum())) / n
    residuals = yv - (slope * xv + intercept)
    ss_res = float((residuals**2).sum())
    ss_tot = float(((yv - yv.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return LinearFit(slope, intercept, r_squared, int(n))


@dataclass(frozen=True)
class PredictionMetrics:
    """Error summary of predictions vs targets; mre is None when undefined."""

    rmse: float
    mae: float
    mre_percent: float | None


def prediction_metrics(pred: Sequence[float], truth: Sequence[float]) -> PredictionMetrics:
    p = np.asarray(list(pred), dtype=float)
    t = np.asarray(list(truth), dtype=float)
    if p.size == 0 or p.size != t.size:
        raise ValueError("predictions and targets must be non-empty and equal length")
    err = p - t
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))
    if (t == 0).any():
        mre = None
    else:
        mre = float(100.0 * np.mean(np.abs(err) / np.abs(t)))
    return PredictionMetrics(rmse, mae, mre)


def regime_curve(records: Iterable[LayerFeatureRecord]) -> list[tuple[float, float, float]]:
    """(ved, sa, z_std) rows sorted by VED, for plotting the regime U-curve."""
    rows = [(r.ved, r.sa_um, r.sa_z_std_um) for r in records]
    rows.sort(key=lambda row: row[0])
    return rows


def _write_csv(path: Path, header: list[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def emit_report(
    out_dir: str | Path,
    records: Sequence[LayerFeatureRecord] = (),
    signature_maps: Sequence[LayerSignatureMap] = (),
    count_bin_edges: Sequence[float] = tuple(float(v) for v in range(0, 11)),
    angle_bin_width: float = 30.0,
) -> list[Path]:
    """Render the analysis bundle (CSV + SVG) under ``out_dir``.

    Emits the feature table, the VED regime curve, count-vs-power and
    count-vs-speed line fits, spatter count/angle histograms, and the
    registered spatter-count plate map. Every file is byte-deterministic
    for identical inputs; empty inputs produce headers-only CSVs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    features_path = out_dir / "features.csv"
    write_feature_csv(features_path, records)
    written.append(features_path)

    curve = regime_curve(records)
    curve_path = out_dir / "regime_curve.csv"
    _write_csv(
        curve_path,
        ["ved", "sa_um", "z_std_um"],
        [(f"{v:.6f}", f"{s:.6f}", f"{z:.6f}") for v, s, z in curve],
    )
    written.append(curve_path)
    plot = SvgPlot(
        make_axes([v for v, _, _ in curve], [s for _, s, _ in curve]),
        "Layer roughness vs volumetric energy density",
        "VED (J/mm^3)",
        "Sa (um)",
    )
    if curve:
        plot.error_bars(*zip(*[(v, s, z) for v, s, z in curve]))
        plot.scatter([v for v, _, _ in curve], [s for _, s, _ in curve])
        plot.line([v for v, _, _ in curve], [s for _, s, _ in curve], color="#1f77b4", width=1.0)
    curve_svg = out_dir / "regime_curve.svg"
    curve_svg.write_text(plot.to_string())
    written.append(curve_svg)

    # Count-vs-power and count-vs-speed fits over records sharing the other
    # parameter (the classic single-layer regression views).
    fits_rows = []
    by_power = [(r.power_w, r.mean_spatter_count) for r in records]
    by_speed = [(r.speed_mm_s, r.mean_spatter_count) for r in records]
    for name, pairs in (("count_vs_power", by_power), ("count_vs_speed", by_speed)):
        xs = [p[0] for p in pairs]
        if len(pairs) >= 2 and len(set(xs)) >= 2:
            fit = linfit(xs, [p[1] for p in pairs])
            fits_rows.append(
                (name, f"{fit.slope:.8f}", f"{fit.intercept:.8f}", f"{fit.r_squared:.6f}", fit.n)
            )
    fits_path = out_dir / "fits.csv"
    _write_csv(fits_path, ["fit", "slope", "intercept", "r_squared", "n"], fits_rows)
    written.append(fits_path)

    counts: list[float] = []
    angles: list[float] = []
    plate_points: list[tuple[float, float, int]] = []
    for sig in signature_maps:
        for obs in sig.observations:
            counts.append(float(obs.spatter_count))
            angles.extend(obs.ejection_angles)
            plate_points.append((obs.mp_center_mm[0], obs.mp_center_mm[1], obs.spatter_count))

    count_hist = histogram(counts, count_bin_edges)
    angle_edges = [angle_bin_width * i for i in range(int(360 / angle_bin_width) + 1)]
    angle_hist = histogram(angles, angle_edges)
    for name, hist in (("count_histogram", count_hist), ("angle_histogram", angle_hist)):
        path = out_dir / f"{name}.csv"
        _write_csv(
            path,
            ["bin_lo", "bin_hi", "count"],
            [
                (f"{hist.bin_edges[i]:g}", f"{hist.bin_edges[i + 1]:g}", hist.counts[i])
                for i in range(len(hist.counts))
            ],
        )
        written.append(path)
        plot = SvgPlot(
            make_axes(hist.bin_edges, list(hist.counts) + [0.0]),
            name.replace("_", " "),
            "value",
            "frequency",
        )
        plot.bars(hist.bin_edges, hist.counts)
        svg_path = out_dir / f"{name}.svg"
        svg_path.write_text(plot.to_string())
        written.append(svg_path)

    map_path = out_dir / "spatter_map.svg"
    plot = SvgPlot(
        make_axes([p[0] for p in plate_points], [p[1] for p in plate_points]),
        "Registered spatter count per melt pool",
        "plate x (mm)",
        "plate y (mm)",
    )
    for x, y, c in plate_points:
        plot.scatter([x], [y], radius=1.5 + 0.7 * c)
    map_path.write_text(plot.to_string())
    written.append(map_path)
    return written


def layer_summary_rows(
    signature_maps: Sequence[LayerSignatureMap],
    hatch_angles: dict[int, float],
    sa_by_layer: dict[int, float],
) -> list[tuple[int, float, float, float]]:
    """(layer, hatch_angle, mean_count, sa) rows for the per-layer table."""
    rows = []
    for sig in sorted(signature_maps, key=lambda s: s.layer_index):
        mean_count = sig.mean_spatter_count if sig.mean_spatter_count is not None else math.nan
        rows.append(
            (
                sig.layer_index,
                hatch_angles.get(sig.layer_index, math.nan),
                mean_count,
                sa_by_layer.get(sig.layer_index, math.nan),
            )
        )
    return rows
