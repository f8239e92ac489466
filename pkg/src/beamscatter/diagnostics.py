"""Concentration tracking, space-time norms and per-sample diagnostic records.

The localized energy here integrates the unhalved density
``v^2 + (Lap u)^2 + m u^2``, so over the whole torus it equals ``2 E0``.
Every comparison against ``E0`` below carries that factor explicitly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import kernels
from .grid import Grid
from .linear import EnergyState, Params, free_energy
from .solver import Trajectory, angular_momentum_table, momentum, total_energy

__all__ = [
    "BallClampWarning",
    "DiagnosticsRecord",
    "CenterTrack",
    "energy_density",
    "localized_energy",
    "concentration_sup",
    "concentration_radius",
    "radius_ladder",
    "track_center",
    "smooth_center",
    "center_velocity",
    "s_density",
    "s_accumulate",
    "window_density",
    "mixed_norm",
    "space_time_norm",
    "n_norm",
    "n_norm_exponents",
    "is_admissible",
    "compute_records",
]


class BallClampWarning(UserWarning):
    pass


def energy_density(state: EnergyState, m: float) -> np.ndarray:
    """Pointwise ``v^2 + (Lap u)^2 + m u^2``."""
    lap = state.grid.laplacian(state.u)
    return state.v * state.v + lap * lap + m * state.u * state.u


def _clamp_radius(grid: Grid, R: float) -> float:
    if not R > 0:
        raise ValueError("R must be positive")
    if R > 0.5 * min(grid.side):
        warnings.warn(
            f"R={R:g} exceeds half the box; the periodic ball wraps onto itself",
            BallClampWarning,
            stacklevel=3,
        )
    return min(R, grid.covering_radius)


def localized_energy(state: EnergyState, y, R: float, m: float) -> float:
    """``int_{B(y, R)} (v^2 + (Lap u)^2 + m u^2)`` over the periodic ball."""
    g = state.grid
    R = _clamp_radius(g, R)
    dens = energy_density(state, m)
    if R >= g.covering_radius:
        return g.integrate(dens)
    return g.integrate(np.where(g.distance(y) <= R, dens, 0.0))


def _ball_mass_map(grid: Grid, dens: np.ndarray, R: float) -> np.ndarray:
    """Ball integral of ``dens`` centred at every grid point (circular correlation)."""
    ball = (grid.distance([0.0] * grid.n) <= R).astype(float)
    out = grid.ifft(grid.fft(dens) * grid.fft(ball)) * grid.cell_volume
    return out


def _first_max(values: np.ndarray, rtol: float = 1e-12) -> int:
    flat = values.reshape(-1)
    top = float(flat.max())
    return int(np.flatnonzero(flat >= top - rtol * abs(top))[0])


def concentration_sup(state: EnergyState, R: float, m: float):
    """Largest ball energy over grid-point centres.

    Returns ``(value, y)``.  Near-ties (within ``1e-12`` relative) go to the
    smallest row-major grid index.
    """
    g = state.grid
    R = _clamp_radius(g, R)
    dens = energy_density(state, m)
    if R >= g.covering_radius:
        return g.integrate(dens), np.zeros(g.n)
    mass = _ball_mass_map(g, dens, R)
    idx = np.unravel_index(_first_max(mass), g.shape)
    y = np.array([g.coords[ax][i] for ax, i in enumerate(idx)])
    value = g.integrate(np.where(g.distance(y) <= R, dens, 0.0))
    return value, y


def radius_ladder(grid: Grid, steps: int = 32) -> np.ndarray:
    """Evenly spaced radii from one cell up to the covering radius."""
    return np.linspace(min(grid.dx), grid.covering_radius, steps)


def concentration_radius(
    state: EnergyState, delta: float, m: float, ladder: Optional[Sequence[float]] = None
):
    """Smallest ladder radius whose ball sup exceeds ``(1 - delta) 2 E0``.

    Returns ``(R, found)``; when nothing qualifies ``R`` is the ladder top and
    ``found`` is False.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    g = state.grid
    ladder = radius_ladder(g) if ladder is None else np.sort(np.asarray(ladder, dtype=float))
    target = (1.0 - delta) * 2.0 * free_energy(state, m)
    dens = energy_density(state, m)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BallClampWarning)
        for R in ladder:
            R = _clamp_radius(g, float(R))
            if R >= g.covering_radius:
                top = g.integrate(dens)
            else:
                top = float(_ball_mass_map(g, dens, R).max())
            if top > target:
                return float(R), True
    return float(ladder[-1]), False


@dataclass
class CenterTrack:
    times: np.ndarray
    y: np.ndarray
    raw: np.ndarray
    jumps: list = field(default_factory=list)


def _states_and_times(traj):
    if isinstance(traj, Trajectory):
        return traj.states, np.asarray(traj.times)
    times, states = traj
    return list(states), np.asarray(times, dtype=float)


def track_center(traj, R: float, m: float) -> CenterTrack:
    """Concentration centre per sample, lifted continuously off the torus.

    Consecutive samples are joined by the minimal periodic displacement;
    displacements longer than a quarter box are recorded in ``jumps``.
    """
    states, times = _states_and_times(traj)
    g = states[0].grid
    side = np.array(g.side)
    raw = np.array([concentration_sup(s, R, m)[1] for s in states])
    y = raw.copy()
    jumps = []
    for k in range(1, len(raw)):
        d = raw[k] - raw[k - 1]
        d -= side * np.round(d / side)
        if np.any(np.abs(d) > 0.25 * side):
            jumps.append(k)
        y[k] = y[k - 1] + d
    return CenterTrack(times, y, raw, jumps)


def smooth_center(times, y, v_cap: float, window: int = 5) -> np.ndarray:
    """Moving average of ``y`` followed by a rate limit ``|dy/dt| <= v_cap``."""
    times = np.asarray(times, dtype=float)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if y.shape[0] != times.size:
        y = y.T
    K = y.shape[0]
    half = max(0, window // 2)
    ma = np.empty_like(y)
    for k in range(K):
        lo, hi = max(0, k - half), min(K, k + half + 1)
        ma[k] = y[lo:hi].mean(axis=0)
    out = np.empty_like(y)
    out[0] = ma[0]
    for k in range(1, K):
        step = ma[k] - out[k - 1]
        cap = v_cap * (times[k] - times[k - 1])
        norm = float(np.linalg.norm(step))
        if norm > cap:
            step *= cap / norm
        out[k] = out[k - 1] + step
    return out


def center_velocity(times, y) -> np.ndarray:
    """Second-order difference estimate of ``dy/dt``."""
    y = np.asarray(y, dtype=float)
    if len(times) < 3:
        return np.zeros_like(y)
    return np.gradient(y, np.asarray(times, dtype=float), axis=0, edge_order=2)


def s_density(state: EnergyState, p: float) -> float:
    """``int |u|^(p+1)``."""
    return kernels.power_sum(state.u, p + 1) * state.grid.cell_volume


def s_accumulate(traj, p: float) -> np.ndarray:
    """Cumulative trapezoid of ``t -> int |u(t)|^(p+1)``, starting at 0."""
    states, times = _states_and_times(traj)
    dens = np.array([s_density(s, p) for s in states])
    if len(times) < 2:
        return np.zeros(len(times))
    return cumulative_trapezoid(dens, times, initial=0.0)


def window_density(times, cumulative, tau: float):
    """Integrals over consecutive windows of length ``tau``.

    ``tau`` must be a whole number of sample intervals.  Returns
    ``(starts, values)`` where ``values[i] = cumulative[end_i] - cumulative[start_i]``.
    """
    times = np.asarray(times, dtype=float)
    cumulative = np.asarray(cumulative, dtype=float)
    h = times[1] - times[0]
    w = int(round(tau / h))
    if w < 1 or abs(w * h - tau) > 1e-9 * max(1.0, tau):
        raise ValueError(f"tau={tau} is not a multiple of the cadence {h}")
    idx = np.arange(0, len(times), w)
    return times[idx[:-1]], np.diff(cumulative[idx])


def _interval_slice(times: np.ndarray, interval):
    if interval is None:
        return slice(0, len(times))
    t0, t1 = interval
    tol = 1e-9 * max(1.0, abs(t0), abs(t1))
    if t0 < times[0] - tol or t1 > times[-1] + tol or t1 < t0:
        raise ValueError(
            f"interval [{t0}, {t1}] not covered by snapshots [{times[0]}, {times[-1]}]"
        )
    i0 = int(np.searchsorted(times, t0 - tol))
    i1 = int(np.searchsorted(times, t1 + tol))
    return slice(i0, i1)


def space_time_norm(times, fields, grid: Grid, a: float, b: float, interval=None) -> float:
    """``|| f ||_{L^a_t L^b_x}`` with time trapezoid and midpoint space quadrature."""
    if not (a >= 1 and b >= 1):
        raise ValueError("exponents must be >= 1")
    times = np.asarray(times, dtype=float)
    sl = _interval_slice(times, interval)
    ts = times[sl]
    fs = list(fields)[sl]
    if math.isinf(b):
        spatial = np.array([float(np.max(np.abs(f))) for f in fs])
    else:
        spatial = np.array(
            [(kernels.power_sum(np.ascontiguousarray(f, dtype=float), b) * grid.cell_volume) ** (1.0 / b) for f in fs]
        )
    if math.isinf(a):
        return float(spatial.max()) if spatial.size else 0.0
    if ts.size < 2:
        return 0.0
    return float(np.trapezoid(spatial ** a, ts) ** (1.0 / a))


def mixed_norm(traj, a: float, b: float, interval=None) -> float:
    """``|| u ||_{L^a(I, L^b)}`` along a trajectory."""
    states, times = _states_and_times(traj)
    return space_time_norm(times, [s.u for s in states], states[0].grid, a, b, interval)


def n_norm_exponents(n: int) -> tuple[float, float]:
    return 2.0 * (n + 2) / (n + 4), 2.0 * (n + 4) / (n + 8)


def n_norm(times, fields, grid: Grid, interval=None) -> float:
    """Sum of the diagonal ``L^r_t L^r_x`` norms at both inhomogeneous exponents."""
    return sum(
        space_time_norm(times, fields, grid, r, r, interval) for r in n_norm_exponents(grid.n)
    )


def is_admissible(a: float, b: float, n: int, tol: float = 1e-12) -> bool:
    """``4/a + n/b <= n/2``."""
    return 4.0 / a + n / b <= n / 2.0 + tol


@dataclass
class DiagnosticsRecord:
    t: float
    E: float
    E0: float
    Mom: np.ndarray
    Omega: np.ndarray
    Scum: float
    y: np.ndarray
    ytilde: np.ndarray
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        n = self.Mom.size
        out = {"t": self.t, "E": self.E, "E0": self.E0}
        for i in range(n):
            out[f"Mom_{i + 1}"] = float(self.Mom[i])
        for i in range(n):
            for j in range(i + 1, n):
                out[f"Omega_{i + 1}{j + 1}"] = float(self.Omega[i, j])
        out["Scum"] = self.Scum
        for i in range(n):
            out[f"y_{i + 1}"] = float(self.y[i])
        for i in range(n):
            out[f"ytilde_{i + 1}"] = float(self.ytilde[i])
        out.update(self.extra)
        return out


def compute_records(
    traj: Trajectory, R: float, v_cap: float, extra: Optional[dict] = None
) -> list[DiagnosticsRecord]:
    """One record per snapshot; ``extra`` maps column names to per-sample series."""
    params: Params = traj.params
    track = track_center(traj, R, params.m)
    ytil = smooth_center(track.times, track.y, v_cap)
    scum = s_accumulate(traj, params.p)
    records = []
    for k, st in enumerate(traj.states):
        cols = {name: float(series[k]) for name, series in (extra or {}).items()}
        records.append(
            DiagnosticsRecord(
                t=float(traj.times[k]),
                E=total_energy(st, params),
                E0=free_energy(st, params.m),
                Mom=momentum(st),
                Omega=angular_momentum_table(st) if st.grid.n >= 2 else np.zeros((1, 1)),
                Scum=float(scum[k]),
                y=track.y[k],
                ytilde=ytil[k],
                extra=cols,
            )
        )
    return records
