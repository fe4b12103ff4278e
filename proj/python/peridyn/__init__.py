"""Mesh-free bond-based peridynamics solver."""

from ._peridyn import (
    analytic_neighborhood_volume,
    bond_stretch,
    build_family,
    crack_speed,
    critical_stretch,
    local_damage,
    lump_volumes,
    memory_estimate,
    pmb_micromodulus,
    precision,
    rayleigh_speed,
    reduce_group,
    run_config,
    surface_correction_factors,
)

__all__ = [
    "analytic_neighborhood_volume",
    "bond_stretch",
    "build_family",
    "crack_speed",
    "critical_stretch",
    "local_damage",
    "lump_volumes",
    "memory_estimate",
    "pmb_micromodulus",
    "precision",
    "rayleigh_speed",
    "reduce_group",
    "run_config",
    "surface_correction_factors",
]
