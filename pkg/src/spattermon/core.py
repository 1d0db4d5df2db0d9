"""Process parameters, energy densities, and the hatch-rotation schedule.

Internal units are fixed: W, mm/s, mm, J/mm^2, J/mm^3, degrees at the
interface. Ingest helpers convert the mixed units common in machine logs
(m/s for scan speed, micrometres for hatch spacing and layer thickness).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class InvalidParameterError(ValueError):
    """Raised when process parameters violate their physical domain."""


@dataclass(frozen=True)
class ProcessParameters:
    """Laser power (W), scan speed (mm/s), hatch space (mm), layer thickness (mm)."""

    power: float
    scan_speed: float
    hatch_space: float
    layer_thickness: float

    def __post_init__(self):
        if self.power < 0:
            raise InvalidParameterError("power must be >= 0 W")
        if self.scan_speed <= 0:
            raise InvalidParameterError("scan_speed must be > 0 mm/s")
        if self.hatch_space <= 0:
            raise InvalidParameterError("hatch_space must be > 0 mm")
        if self.layer_thickness <= 0:
            raise InvalidParameterError("layer_thickness must be > 0 mm")

    @staticmethod
    def from_machine_units(
        power_w: float,
        speed_m_per_s: float,
        hatch_space_um: float,
        layer_thickness_um: float,
    ) -> "ProcessParameters":
        """Build from the mixed units used in machine settings tables."""
        return ProcessParameters(
            power=power_w,
            scan_speed=speed_m_per_s * 1000.0,
            hatch_space=hatch_space_um / 1000.0,
            layer_thickness=layer_thickness_um / 1000.0,
        )


@dataclass(frozen=True)
class EnergyDensities:
    """Lumped laser input factors: surface (J/mm^2) and volumetric (J/mm^3)."""

    sed: float
    ved: float


def compute_sed(p: ProcessParameters) -> float:
    """Surface energy density P / (V * HS) in J/mm^2."""
    return p.power / (p.scan_speed * p.hatch_space)


def compute_ved(p: ProcessParameters) -> float:
    """Volumetric energy density P / (V * HS * t) in J/mm^3."""
    return compute_sed(p) / p.layer_thickness


def energy_densities(p: ProcessParameters) -> EnergyDensities:
    sed = compute_sed(p)
    return EnergyDensities(sed=sed, ved=sed / p.layer_thickness)


def normalize_hatch_angle(angle: float) -> float:
    """Fold a scan angle into [0, 180); angles 180 degrees apart hatch identically.

    Uses mathematical mod, so negative inputs also land in [0, 180).
    """
    if not math.isfinite(angle):
        raise InvalidParameterError("hatch angle must be finite")
    return angle % 180.0


@dataclass(frozen=True)
class HatchSchedule:
    """Per-layer hatch rotation: base angle plus a fixed rotation per layer."""

    base_angle: float = 0.0
    rotation_per_layer: float = 67.0

    def __post_init__(self):
        if not 0.0 <= self.base_angle < 360.0:
            raise InvalidParameterError("base_angle must lie in [0, 360)")


def hatch_angle_for_layer(schedule: HatchSchedule, layer_index: int) -> float:
    """Normalized hatch angle of ``layer_index`` (layer 0 scans at base_angle)."""
    if layer_index < 0:
        raise InvalidParameterError("layer_index must be >= 0")
    return normalize_hatch_angle(
        schedule.base_angle + schedule.rotation_per_layer * layer_index
    )
