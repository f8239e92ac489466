"""Wave-operator pullbacks, scattering defects and the small-data / perturbation experiments."""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from .diagnostics import n_norm, s_accumulate, space_time_norm, window_density
from .grid import Grid
from .linear import EnergyState, Params, evolve_linear, free_energy, group_velocity_max
from .solver import Trajectory, integrate

__all__ = [
    "pullback",
    "defect",
    "gap",
    "cauchy_test",
    "s_norm",
    "max_horizon",
    "scattering_verdict",
    "small_data_experiment",
    "perturbation_experiment",
    "SIGN_CONVENTIONS",
]

SIGN_CONVENTIONS = {
    "integrated": "v_tt + Lap^2 v + m v + lam |v|^(p-1) v = e",
    "alternative": "v_tt + Lap^2 v + m v - lam |v|^(p-1) v = e",
}


def pullback(state: EnergyState, T: float, m: float) -> EnergyState:
    """Candidate scattering data ``W(-T) state``."""
    return evolve_linear(state, -T, m)


def defect(traj: Trajectory, linear_data: EnergyState, t: float) -> float:
    """Energy-norm distance ``sqrt(E0(u(t) - W(t) data))``."""
    m = traj.params.m
    diff = traj.at(t) - evolve_linear(linear_data, t, m)
    return math.sqrt(max(free_energy(diff, m), 0.0))


def gap(traj: Trajectory, Ti: float, Tj: float) -> float:
    """``sqrt(E0(W(-Ti) u(Ti) - W(-Tj) u(Tj)))``."""
    m = traj.params.m
    if Ti == Tj:
        return 0.0
    d = pullback(traj.at(Ti), Ti, m) - pullback(traj.at(Tj), Tj, m)
    return math.sqrt(max(free_energy(d, m), 0.0))


def cauchy_test(traj: Trajectory, T_list: Sequence[float]) -> np.ndarray:
    """Symmetric matrix of pullback gaps between every pair of horizons."""
    T_list = list(T_list)
    if len(T_list) < 2:
        raise ValueError("cauchy_test needs at least two horizons")
    k = len(T_list)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = gap(traj, T_list[i], T_list[j])
    return out


def s_norm(traj: Trajectory, interval=None) -> float:
    """``|| u ||_{L^(p+1)_t L^(p+1)_x}`` over the run or a sub-interval."""
    q = traj.params.p + 1
    return space_time_norm(traj.times, [s.u for s in traj.states], traj.grid, q, q, interval)


def max_horizon(grid: Grid, m: float) -> float:
    """Largest ``T`` with ``2 v_max T <= L``."""
    return 0.5 * min(grid.side) / group_velocity_max(grid, m)


def scattering_verdict(
    traj: Trajectory,
    tol: Optional[float] = None,
    window: Optional[float] = None,
    tail_fraction: float = 0.1,
) -> dict:
    """Finite-horizon scattering proxy.

    Scattering is declared when ``gap(T/2, T) <= tol`` (default
    ``1e-3 sqrt(E0)``) and the last S-window holds at most ``tail_fraction``
    of the cumulative S-integral.
    """
    T = float(traj.times[-1])
    E0 = free_energy(traj.states[0], traj.params.m)
    tol = 1e-3 * math.sqrt(E0) if tol is None else tol
    half = traj.times[int(np.argmin(np.abs(traj.times - T / 2)))]
    g_half = gap(traj, float(half), T)
    cum = s_accumulate(traj, traj.params.p)
    window = T / 10 if window is None else window
    starts, vals = window_density(traj.times, cum, window)
    total = float(cum[-1])
    tail = float(vals[-1]) if vals.size else 0.0
    tail_ok = tail <= tail_fraction * total if total > 0 else True
    return {
        "T": T,
        "T_half": float(half),
        "gap_half_T": g_half,
        "tol": tol,
        "sqrt_E0": math.sqrt(E0),
        "gap_ok": g_half <= tol,
        "cumulative_S": total,
        "window": window,
        "window_starts": starts.tolist(),
        "window_values": vals.tolist(),
        "tail_window": tail,
        "tail_ok": bool(tail_ok),
        "scatters": bool(g_half <= tol and tail_ok),
    }


def _linear_trajectory(initial: EnergyState, params: Params, times) -> list:
    return [evolve_linear(initial, float(t), params.m) for t in times]


def small_data_experiment(
    initial: EnergyState,
    params: Params,
    dt: float,
    T: float,
    amplitudes: Sequence[float],
    stride: int = 1,
    bound: float = 2.0,
    allow_wraparound: bool = False,
) -> dict:
    """Ratio ``||u||_S / ||w||_S`` of nonlinear to free evolution from ``A * initial``.

    The ratio is 1 by convention at amplitude 0.  ``passed`` checks the
    smallest positive amplitude against ``bound``.
    """
    if params.lam <= 0:
        raise ValueError("small-data experiment needs lam > 0")
    q = params.p + 1
    rows = []
    for A in amplitudes:
        if A == 0:
            rows.append({"amplitude": 0.0, "S_nonlinear": 0.0, "S_linear": 0.0, "ratio": 1.0})
            continue
        data = initial * A
        traj = integrate(data, params, dt, T, stride, allow_wraparound=allow_wraparound)
        lin = _linear_trajectory(data, params, traj.times)
        su = s_norm(traj)
        sw = space_time_norm(traj.times, [s.u for s in lin], traj.grid, q, q)
        rows.append(
            {"amplitude": float(A), "S_nonlinear": su, "S_linear": sw, "ratio": su / sw if sw > 0 else 1.0}
        )
    positive = [r for r in rows if r["amplitude"] > 0]
    smallest = min(positive, key=lambda r: r["amplitude"]) if positive else rows[0]
    ordered = sorted(rows, key=lambda r: r["amplitude"])
    ratios = [r["ratio"] for r in ordered]
    return {
        "rows": rows,
        "bound": bound,
        "smallest_amplitude": smallest["amplitude"],
        "smallest_ratio": smallest["ratio"],
        "ratios_nondecreasing": bool(all(b >= a - 1e-12 for a, b in zip(ratios, ratios[1:]))),
        "passed": bool(smallest["ratio"] <= bound),
    }


def _default_forcing_shape(initial: EnergyState) -> np.ndarray:
    u = np.asarray(initial.u)
    top = float(np.max(np.abs(u)))
    if top == 0:
        raise ValueError("initial data vanish; supply a forcing shape")
    return u / top


def perturbation_experiment(
    initial: EnergyState,
    params: Params,
    dt: float,
    T: float,
    deltas: Sequence[float],
    shape: Optional[np.ndarray] = None,
    temporal: Callable[[float], float] = math.cos,
    stride: int = 1,
    band: tuple = (0.3, 3.0),
    allow_wraparound: bool = False,
) -> dict:
    """Response ``||u - v||_S`` of the forced solution ``v`` against the forcing size.

    ``v`` solves the equation with source ``e = delta * temporal(t) * shape(x)``;
    ``u`` the unforced equation from the same data.  ``passed`` checks that
    each successive response ratio lies within ``band`` times the delta ratio.
    """
    shape = _default_forcing_shape(initial) if shape is None else np.asarray(shape, dtype=float)
    q = params.p + 1
    base = integrate(initial, params, dt, T, stride, allow_wraparound=allow_wraparound)
    rows = []
    for d in deltas:
        if d == 0:
            rows.append({"delta": 0.0, "response": 0.0, "forcing_N_norm": 0.0})
            continue
        forcing = lambda t, d=d: (d * temporal(t)) * shape
        forced = integrate(initial, params, dt, T, stride, forcing=forcing, allow_wraparound=allow_wraparound)
        diff = [a.u - b.u for a, b in zip(base.states, forced.states)]
        resp = space_time_norm(base.times, diff, base.grid, q, q)
        e_samples = [forcing(float(t)) for t in base.times]
        rows.append(
            {"delta": float(d), "response": resp, "forcing_N_norm": n_norm(base.times, e_samples, base.grid)}
        )
    checks = []
    pos = sorted((r for r in rows if r["delta"] > 0), key=lambda r: r["delta"])
    for lo, hi in zip(pos, pos[1:]):
        dr = hi["delta"] / lo["delta"]
        rr = hi["response"] / lo["response"] if lo["response"] > 0 else math.inf
        checks.append(
            {"deltas": [lo["delta"], hi["delta"]], "delta_ratio": dr, "response_ratio": rr,
             "ok": bool(band[0] * dr <= rr <= band[1] * dr)}
        )
    fitted = max((r["response"] / r["delta"] for r in pos), default=0.0)
    return {
        "sign_conventions": SIGN_CONVENTIONS,
        "rows": rows,
        "ratio_checks": checks,
        "fitted_C": fitted,
        "passed": bool(all(c["ok"] for c in checks)),
    }

