"""Synthetic per-layer feature records for regression studies.

Generates (bar, layer) records that behave like the monitored experiment:
roughness follows a U-shaped curve in volumetric energy density, the
registered spatter count grows with energy density and spikes when the
hatch direction sits near the worst angle to the gas flow, and that
count-borne extra spatter feeds back into roughness. Because the hatch
angle influences roughness only through the count, models given the count
see real signal that energy density alone cannot explain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .analytics import LayerFeatureRecord
from .core import HatchSchedule, ProcessParameters, compute_ved, hatch_angle_for_layer
from .rng import Xorshift64Star

# Six process settings spanning conduction through keyhole, (P W, V mm/s, HS mm).
DEFAULT_BAR_SETTINGS = (
    (200.0, 1500.0, 0.110),
    (200.0, 1000.0, 0.110),
    (250.0, 1000.0, 0.110),
    (285.0, 960.0, 0.110),
    (300.0, 750.0, 0.110),
    (300.0, 650.0, 0.110),
)


@dataclass(frozen=True)
class RoughnessModel:
    """Documented generator coefficients for the synthetic records."""

    sa_floor_um: float = 6.0
    ved_curvature: float = 0.003  # quadratic bowl around the optimum VED
    ved_optimum: float = 68.0
    count_coeff_um: float = 2.0  # extra roughness per registered spatter
    count_ved_coeff: float = 0.035  # mean count per J/mm^3
    count_angle_boost: float = 3.0  # extra count at the worst gas-flow angle
    worst_angle_deg: float = 50.0
    angle_width_deg: float = 25.0
    count_noise: float = 0.25
    sa_noise_um: float = 0.5


def synthesize_feature_records(
    seed: int,
    n_layers: int = 6,
    bar_settings=DEFAULT_BAR_SETTINGS,
    layer_thickness_mm: float = 0.04,
    schedule: HatchSchedule = HatchSchedule(base_angle=74.0),
    first_layer: int = 66,
    model: RoughnessModel = RoughnessModel(),
) -> list[LayerFeatureRecord]:
    """Deterministic records for ``len(bar_settings) * n_layers`` samples."""
    rng = Xorshift64Star(seed)
    records: list[LayerFeatureRecord] = []
    for bar_id, (power, speed, hs) in enumerate(bar_settings, start=1):
        params = ProcessParameters(power, speed, hs, layer_thickness_mm)
        ved = compute_ved(params)
        for layer_offset in range(n_layers):
            layer = first_layer + layer_offset
            angle = hatch_angle_for_layer(schedule, layer - first_layer)
            angle_term = model.count_angle_boost * math.exp(
                -(((angle - model.worst_angle_deg) / model.angle_width_deg) ** 2)
            )
            count = (
                model.count_ved_coeff * ved
                + angle_term
                + rng.normal(0.0, model.count_noise)
            )
            count = max(0.0, count)
            sa = (
                model.sa_floor_um
                + model.ved_curvature * (ved - model.ved_optimum) ** 2
                + model.count_coeff_um * count
                + rng.normal(0.0, model.sa_noise_um)
            )
            records.append(
                LayerFeatureRecord(
                    bar_id=bar_id,
                    layer_index=layer,
                    power_w=power,
                    speed_mm_s=speed,
                    hatch_space_mm=hs,
                    layer_thickness_mm=layer_thickness_mm,
                    ved=ved,
                    hatch_angle_deg=angle,
                    mean_spatter_count=count,
                    sa_um=max(0.5, sa),
                    sa_z_std_um=0.8,
                )
            )
    return records
