"""Bundled reference tables from the monitored 16-bar fatigue print.

These CSVs ship with the package so acceptance tests and demos can check
energy-density math, hatch-angle normalization, and the count-versus-
parameter regressions against the recorded experiment values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources


def _read(name: str) -> list[dict[str, str]]:
    ref = resources.files("spattermon.data").joinpath(name)
    with ref.open("r", newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass(frozen=True)
class ProcessSettingRow:
    sample: int
    power_w: float
    speed_m_s: float
    hatch_space_um: float
    sed_j_mm2: float
    ved_j_mm3: float
    regime: str


def load_table1() -> list[ProcessSettingRow]:
    """The 16 process settings with their recorded SED/VED and regime."""
    return [
        ProcessSettingRow(
            sample=int(r["sample"]),
            power_w=float(r["power_w"]),
            speed_m_s=float(r["speed_m_s"]),
            hatch_space_um=float(r["hatch_space_um"]),
            sed_j_mm2=float(r["sed_j_mm2"]),
            ved_j_mm3=float(r["ved_j_mm3"]),
            regime=r["regime"],
        )
        for r in _read("table1.csv")
    ]


@dataclass(frozen=True)
class LayerHatchRow:
    layer: int
    hatch_angle_deg: float
    normalized_angle_deg: float
    avg_spatter_count: float
    avg_sa_um: float


def load_table3() -> list[LayerHatchRow]:
    """Per-layer hatch angles with average spatter count and roughness."""
    return [
        LayerHatchRow(
            layer=int(r["layer"]),
            hatch_angle_deg=float(r["hatch_angle_deg"]),
            normalized_angle_deg=float(r["normalized_angle_deg"]),
            avg_spatter_count=float(r["avg_spatter_count"]),
            avg_sa_um=float(r["avg_sa_um"]),
        )
        for r in _read("table3.csv")
    ]


def load_power_sweep() -> list[tuple[float, float]]:
    """(power W, avg spatter count) at fixed 1 m/s scan speed."""
    return [(float(r["power_w"]), float(r["avg_spatter_count"])) for r in _read("tableA1.csv")]


def load_speed_sweep() -> list[tuple[float, float]]:
    """(scan speed m/s, avg spatter count) at fixed 250 W power."""
    return [(float(r["speed_m_s"]), float(r["avg_spatter_count"])) for r in _read("tableA2.csv")]
