"""Disordered spin chain: rotation flow, exact diagonalization and ensemble statistics."""

from ._mblflow import (
    CapacityError,
    ConfigError,
    Disorder,
    Error,
    FlowState,
    __version__,
    build_hamiltonian,
    config_json,
    default_epsilon,
    derive_seed,
    detect_resonant_sites,
    eigh,
    min_level_spacing,
    radial_scaling_check,
    run_ensemble,
    run_flow,
    sample_disorder,
)

__all__ = [
    "CapacityError",
    "ConfigError",
    "Disorder",
    "Error",
    "FlowState",
    "__version__",
    "build_hamiltonian",
    "config_json",
    "default_epsilon",
    "derive_seed",
    "detect_resonant_sites",
    "eigh",
    "min_level_spacing",
    "radial_scaling_check",
    "run_ensemble",
    "run_flow",
    "sample_disorder",
]
