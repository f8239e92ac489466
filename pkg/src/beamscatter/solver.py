"""Strang split-step integration of the nonlinear beam equation and its conserved functionals.

The linear part is advanced exactly in frequency space; the nonlinear part
``u_t = 0, v_t = -lam |u|^(p-1) u`` is solved exactly by a pointwise kick.
A 2/3-rule truncation is applied to ``u`` before the nonlinearity is
evaluated and to the result.  For non-integer ``p`` the nonlinearity is not
band-limited, so aliasing is only reduced; conservation diagnostics are the
guard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .grid import Grid
from .linear import EnergyState, Params, evolve_linear, free_energy, group_velocity_max

__all__ = [
    "WraparoundError",
    "Trajectory",
    "nonlinear_substep",
    "strang_step",
    "integrate",
    "simulate",
    "check_budget",
    "total_energy",
    "potential_energy",
    "momentum",
    "omega_vector",
    "angular_momentum",
    "angular_momentum_table",
]

Forcing = Callable[[float], np.ndarray]


class WraparoundError(ValueError):
    """The requested horizon lets the fastest resolved wave cross half the box."""


def _check_overflow(u: np.ndarray, p: float) -> None:
    umax = float(np.max(np.abs(u))) if u.size else 0.0
    if umax > 1.0 and p * math.log(umax) > 700.0:
        raise OverflowError(f"|u|^p overflows: max |u| = {umax:.6g}, p = {p}")


def nonlinear_substep(
    state: EnergyState, tau: float, params: Params, dealias: bool = True
) -> EnergyState:
    """Exact flow of ``(u, v) -> (u, v - tau lam |u|^(p-1) u)``."""
    g = state.grid
    if params.lam == 0:
        return state
    _check_overflow(state.u, params.p)
    if dealias:
        mask = g.dealias_mask
        u = g.ifft(g.fft(state.u) * mask)
    else:
        u = np.array(state.u)
    acc = np.zeros(g.shape)
    kernels.nonlinear_kick(u, acc, tau * params.lam, params.p)
    if dealias:
        acc = g.ifft(g.fft(acc) * mask)
    return EnergyState(g, state.u, state.v + acc)


def strang_step(state: EnergyState, dt: float, params: Params) -> EnergyState:
    """``W(dt/2) o N(dt) o W(dt/2)``; reduces to ``W(dt)`` when ``lam = 0``."""
    if params.lam == 0:
        return evolve_linear(state, dt, params.m)
    half = evolve_linear(state, 0.5 * dt, params.m)
    return evolve_linear(nonlinear_substep(half, dt, params), 0.5 * dt, params.m)


def check_budget(grid: Grid, m: float, T: float, allow: bool = False) -> float:
    """Enforce ``2 v_max T <= L``; returns ``v_max``."""
    vmax = group_velocity_max(grid, m)
    half_box = 0.5 * min(grid.side)
    if vmax * abs(T) > half_box and not allow:
        raise WraparoundError(
            f"horizon T={T:g} exceeds the wrap-around budget: "
            f"v_max*T = {vmax * abs(T):.6g} > L/2 = {half_box:.6g} (v_max = {vmax:.6g})"
        )
    return vmax


@dataclass
class Trajectory:
    """Snapshots of a run sampled every ``stride`` steps of size ``dt``."""

    grid: Grid
    params: Params
    dt: float
    stride: int
    times: np.ndarray
    states: list
    meta: dict = field(default_factory=dict)

    @property
    def cadence(self) -> float:
        return self.dt * self.stride

    def __len__(self) -> int:
        return len(self.states)

    def index_of(self, t: float, tol: Optional[float] = None) -> int:
        tol = 1e-9 * max(1.0, abs(t)) if tol is None else tol
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol:
            raise ValueError(
                f"t={t} is not a snapshot time (snapshots span "
                f"[{self.times[0]}, {self.times[-1]}] at cadence {self.cadence})"
            )
        return i

    def at(self, t: float) -> EnergyState:
        return self.states[self.index_of(t)]


class _Stepper:
    """Spectral-space Strang integrator with merged half steps."""

    def __init__(self, grid: Grid, params: Params, dt: float, forcing: Optional[Forcing]):
        self.g = grid
        self.params = params
        self.dt = dt
        self.forcing = forcing
        w = np.sqrt(grid.k2 * grid.k2 + params.m)
        self.half = self._mult(w, 0.5 * dt)
        self.full = self._mult(w, dt)
        self.mask = grid.dealias_mask
        self.active = params.lam != 0 or forcing is not None

    @staticmethod
    def _mult(w, t):
        c = np.cos(t * w)
        s = np.sin(t * w)
        return c, s / w, w * s

    def _kick(self, uh, vh, t_mid):
        g, prm = self.g, self.params
        acc = np.zeros(g.shape)
        if prm.lam != 0:
            u = g.ifft(uh * self.mask)
            _check_overflow(u, prm.p)
            kernels.nonlinear_kick(u, acc, self.dt * prm.lam, prm.p)
        if self.forcing is not None:
            acc += self.dt * np.asarray(self.forcing(t_mid), dtype=float)
        vh += g.fft(acc) * self.mask

    def advance(self, uh, vh, t0: float, nsteps: int) -> None:
        if nsteps <= 0:
            return
        if not self.active:
            for _ in range(nsteps):
                kernels.linear_rotate(uh, vh, *self.full)
            return
        kernels.linear_rotate(uh, vh, *self.half)
        for i in range(nsteps):
            self._kick(uh, vh, t0 + (i + 0.5) * self.dt)
            kernels.linear_rotate(uh, vh, *(self.full if i < nsteps - 1 else self.half))


def integrate(
    initial: EnergyState,
    params: Params,
    dt: float,
    T: float,
    stride: int = 1,
    forcing: Optional[Forcing] = None,
    allow_wraparound: bool = False,
    t0: float = 0.0,
) -> Trajectory:
    """Fixed-step march from ``t0`` to ``t0 + T`` with snapshots every ``stride`` steps.

    ``forcing(t)`` adds a source term ``e(t, x)`` to the right-hand side; it is
    sampled at the midpoint of each kick.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a whole number of steps of dt={dt}")
    g = initial.grid
    check_budget(g, params.m, T, allow_wraparound)
    stepper = _Stepper(g, params, dt, forcing)
    uh = g.fft(initial.u)
    vh = g.fft(initial.v)
    times = [t0]
    states = [initial]
    done = 0
    while done < nsteps:
        k = min(stride, nsteps - done)
        stepper.advance(uh, vh, t0 + done * dt, k)
        done += k
        times.append(t0 + done * dt)
        states.append(EnergyState(g, g.ifft(uh), g.ifft(vh)))
    return Trajectory(g, params, dt, stride, np.array(times), states)


def simulate(config, initial: Optional[EnergyState] = None, forcing: Optional[Forcing] = None):
    """Run the configured experiment; returns a :class:`Trajectory`.

    ``config`` is a :class:`beamscatter.config.RunConfig`.  When ``initial`` is
    omitted the initial data are built from ``config.initial``.
    """
    from .config import build_initial

    if initial is None:
        initial = build_initial(config)
    traj = integrate(
        initial,
        config.params,
        config.time.dt,
        config.time.T,
        config.time.snapshot_stride,
        forcing=forcing,
        allow_wraparound=config.allow_wraparound,
    )
    traj.meta["config"] = config
    return traj


def potential_energy(state: EnergyState, params: Params) -> float:
    if params.lam == 0:
        return 0.0
    q = params.p + 1
    return params.lam / q * kernels.power_sum(state.u, q) * state.grid.cell_volume


def total_energy(state: EnergyState, params: Params) -> float:
    """``E = E0 + lam/(p+1) ||u||_{p+1}^{p+1}``."""
    return free_energy(state, params.m) + potential_energy(state, params)


def momentum(state: EnergyState) -> np.ndarray:
    """``Mom = int v grad u``."""
    g = state.grid
    return np.array([g.inner(state.v, d) for d in g.gradient(state.u)])


def _check_pair(n: int, i: int, j: int) -> None:
    if n < 2:
        raise ValueError("angular momentum needs n >= 2")
    if i == j:
        raise ValueError("angular momentum needs i != j")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"axes ({i}, {j}) out of range for n={n}")


def omega_vector(state: EnergyState, i: int, j: int, mom: Optional[np.ndarray] = None) -> np.ndarray:
    """``Omega_ij = int v (d_i u e_j - d_j u e_i)``, an n-vector (axes 0-based)."""
    n = state.grid.n
    _check_pair(n, i, j)
    mom = momentum(state) if mom is None else mom
    out = np.zeros(n)
    out[j] += mom[i]
    out[i] -= mom[j]
    return out


def angular_momentum(state: EnergyState, i: int, j: int, mom: Optional[np.ndarray] = None) -> float:
    """Scalar entry of the antisymmetric table.

    For ``i < j`` this is the ``j``-component of ``Omega_ij``, i.e.
    ``int v d_i u``; the ``i > j`` entries are fixed by antisymmetry.
    """
    _check_pair(state.grid.n, i, j)
    if i > j:
        return -angular_momentum(state, j, i, mom)
    return float(omega_vector(state, i, j, mom)[j])


def angular_momentum_table(state: EnergyState) -> np.ndarray:
    """Antisymmetric ``n x n`` table of :func:`angular_momentum`."""
    n = state.grid.n
    mom = momentum(state)
    tab = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            tab[i, j] = angular_momentum(state, i, j, mom)
            tab[j, i] = -tab[i, j]
    return tab
