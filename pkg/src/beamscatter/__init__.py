"""Pseudospectral simulation and verification toolkit for the defocusing beam equation

    u_tt + Lap^2 u + m u + lam |u|^(p-1) u = 0

on a periodic box.
"""

from .grid import Field, Grid, apply_multiplier, dyadic_range, fractional_derivative, lp_multiplier, lp_norm, lp_project, sobolev_norm
from .kernels import BACKEND
from .linear import EnergyState, Params, energy_inner, evolve_linear, free_energy, group_velocity_max
from .solver import (
    Trajectory,
    WraparoundError,
    angular_momentum,
    integrate,
    momentum,
    simulate,
    strang_step,
    total_energy,
)
from .config import ConfigError, RunConfig, parse_config, parse_config_text

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "EnergyState",
    "Field",
    "Grid",
    "Params",
    "RunConfig",
    "Trajectory",
    "WraparoundError",
    "angular_momentum",
    "apply_multiplier",
    "dyadic_range",
    "energy_inner",
    "evolve_linear",
    "fractional_derivative",
    "free_energy",
    "group_velocity_max",
    "integrate",
    "lp_multiplier",
    "lp_norm",
    "lp_project",
    "momentum",
    "parse_config",
    "parse_config_text",
    "simulate",
    "sobolev_norm",
    "strang_step",
    "total_energy",
]
