"""Desk-scale laboratory for the renewal description of a 1D Kac-Ising chain."""

from .model import (
    ModelParams,
    build_params,
    entropy,
    mf_free_energy,
    mf_free_energy_prime,
    params_from_record,
    solve_magnetization,
)

__all__ = [
    "ModelParams",
    "build_params",
    "entropy",
    "mf_free_energy",
    "mf_free_energy_prime",
    "params_from_record",
    "solve_magnetization",
]

__version__ = "0.1.0"
