"""Energy space, physical parameters and the exact linear beam flow.

The linear equation ``w_tt + Delta^2 w + m w = 0`` is diagonal in frequency
with ``omega(xi) = sqrt(|xi|^4 + m)``, so every call of :func:`evolve_linear`
applies the flow exactly as one Fourier multiplier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import Grid

__all__ = [
    "Params",
    "EnergyState",
    "dispersion_omega",
    "evolve_linear",
    "evolve_linear_spectral",
    "free_energy",
    "energy_inner",
    "group_velocity_max",
]


@dataclass(frozen=True)
class Params:
    """Coefficients of ``u_tt + Delta^2 u + m u + lam |u|^(p-1) u = 0``."""

    m: float = 1.0
    lam: float = 1.0
    p: float = 3.0

    def __post_init__(self):
        if not (self.m > 0 and math.isfinite(self.m)):
            raise ValueError(f"mass m must be positive, got {self.m}")
        if not (self.p > 1 and math.isfinite(self.p)):
            raise ValueError(f"exponent p must exceed 1, got {self.p}")
        if not math.isfinite(self.lam):
            raise ValueError("lam must be finite")

    def s(self, n: int) -> float:
        """Sobolev exponent with ``H^s`` embedding into ``L^(p+1)``."""
        return n * (self.p - 1) / (2 * (self.p + 1))


@dataclass(frozen=True, eq=False)
class EnergyState:
    """A point ``(u, u_t)`` of the energy space, sampled on ``grid``."""

    grid: Grid
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=float)
        v = np.ascontiguousarray(self.v, dtype=float)
        if u.shape != self.grid.shape or v.shape != self.grid.shape:
            raise ValueError(
                f"state arrays {u.shape}/{v.shape} do not match grid {self.grid.shape}"
            )
        u.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, grid: Grid) -> "EnergyState":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    def _check(self, other: "EnergyState") -> None:
        if other.grid != self.grid:
            raise ValueError("states live on different grids")

    def __add__(self, other: "EnergyState") -> "EnergyState":
        self._check(other)
        return EnergyState(self.grid, self.u + other.u, self.v + other.v)

    def __sub__(self, other: "EnergyState") -> "EnergyState":
        self._check(other)
        return EnergyState(self.grid, self.u - other.u, self.v - other.v)

    def __mul__(self, c: float) -> "EnergyState":
        return EnergyState(self.grid, c * self.u, c * self.v)

    __rmul__ = __mul__

    def __neg__(self) -> "EnergyState":
        return EnergyState(self.grid, -self.u, -self.v)

    def flip(self) -> "EnergyState":
        """Time reversal ``(u, v) -> (u, -v)``."""
        return EnergyState(self.grid, self.u, -self.v)

    def translate(self, y) -> "EnergyState":
        """``(u(x - y), v(x - y))``."""
        return EnergyState(self.grid, self.grid.shift(self.u, y), self.grid.shift(self.v, y))


def dispersion_omega(xi, m: float):
    """Linear frequency ``sqrt(|xi|^4 + m)`` for wavenumber magnitude ``xi``."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(xi ** 4 + m)


def _omega(grid: Grid, m: float) -> np.ndarray:
    return np.sqrt(grid.k2 * grid.k2 + m)


def evolve_linear_spectral(grid: Grid, uh: np.ndarray, vh: np.ndarray, t: float, m: float):
    """Exact linear flow applied in place to spectral coefficients."""
    if t == 0:
        return
    w = _omega(grid, m)
    c = np.cos(t * w)
    s = np.sin(t * w)
    kernels.linear_rotate(uh, vh, c, s / w, w * s)


def evolve_linear(state: EnergyState, t: float, m: float) -> EnergyState:
    """``W(t)(u, v)``.

    In frequency: ``u_hat(t) = cos(t w) u_hat + sin(t w)/w v_hat`` and
    ``v_hat(t) = -w sin(t w) u_hat + cos(t w) v_hat``.  Since ``w >= sqrt(m)``
    the quotient is regular everywhere.
    """
    if t == 0:
        return state
    g = state.grid
    uh = g.fft(state.u)
    vh = g.fft(state.v)
    evolve_linear_spectral(g, uh, vh, t, m)
    return EnergyState(g, g.ifft(uh), g.ifft(vh))


def energy_inner(a: EnergyState, b: EnergyState, m: float) -> float:
    """``<(u0, u1), (v0, v1)>_E = int (u1 v1 + Lap u0 Lap v0 + m u0 v0)``."""
    a._check(b)
    g = a.grid
    lap_a = g.laplacian(a.u)
    lap_b = lap_a if b is a else g.laplacian(b.u)
    return g.inner(a.v, b.v) + g.inner(lap_a, lap_b) + m * g.inner(a.u, b.u)


def free_energy(state: EnergyState, m: float) -> float:
    """``E0 = 1/2 int (v^2 + (Lap u)^2 + m u^2)``."""
    return 0.5 * energy_inner(state, state, m)


def group_velocity_max(grid: Grid, m: float) -> float:
    """Largest ``|grad omega| = 2 |xi|^3 / omega`` over the dealiased lattice."""
    kabs = grid.kabs[grid.dealias_mask]
    vg = 2.0 * kabs ** 3 / np.sqrt(kabs ** 4 + m)
    return float(vg.max())
