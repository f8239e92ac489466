"""Weighted virial actions, their exact time derivatives, and identity checks.

All first-moment actions share the form ``I_C = int a(z) (C z . grad u) v``
with ``z = x - y(t)`` (minimal periodic image) and a constant matrix ``C``:

* ``C = identity``           gives the radial action ``Ia``;
* ``C = e e^T``              gives the directional action ``I2`` along ``e``;
* ``C = e_i e_j^T - e_j e_i^T`` gives the rotational action ``R_ij``.

For ``X = a C z`` and ``Q = -v^2 + (Lap u)^2 + m u^2 + 2 lam |u|^(p+1)/(p+1)``
the time derivative along a solution is

    dI/dt = - int ((ydot . grad) X) . grad u  v  + 1/2 int div X  Q
            - int Lap X_l d_l u Lap u  - 2 int d_k X_l d_k d_l u Lap u.

Each right-hand side is returned as ``(bulk, boundary, total)``.  The bulk is
the value the identity takes with ``a = 1``; the boundary integrand is
assembled from terms carrying ``a - 1``, ``grad a`` or ``Lap a`` only, so it
vanishes exactly on ``|z| <= R``.  :func:`rhs_compact` evaluates the
displayed general formula directly as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .grid import Grid
from .linear import EnergyState, Params
from .solver import momentum, total_energy

__all__ = [
    "Cutoff",
    "CutoffFields",
    "phi",
    "rotation_aligning",
    "orthogonal_direction",
    "rotate_state",
    "action_J",
    "rhs_dJ",
    "action_I2",
    "action_A2",
    "rhs_dA2",
    "action_Ia",
    "rhs_dIa",
    "action_A",
    "rhs_dA",
    "action_Rij",
    "rhs_dRij",
    "rhs_compact",
    "boundary_integrand",
    "identity_residual",
    "fd_derivative",
    "virial_series",
    "affine_envelope",
    "momentum_growth_check",
    "transverse_drift_check",
]


# ---------------------------------------------------------------- cutoff


def _smoothstep9(t):
    """C^4 step: 0 at t <= 0, 1 at t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    t5 = t ** 5
    return t5 * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + 70.0 * t))))


def phi(r):
    """Radial profile: 1 on ``[0, 1]``, 0 on ``[2, inf)``, C^4 in between."""
    return 1.0 - _smoothstep9(np.asarray(r, dtype=float) - 1.0)


def _dphi(r):
    t = np.clip(np.asarray(r, dtype=float) - 1.0, 0.0, 1.0)
    return -630.0 * t ** 4 * (1.0 - t) ** 4


def _d2phi(r):
    t = np.clip(np.asarray(r, dtype=float) - 1.0, 0.0, 1.0)
    return -2520.0 * t ** 3 * (1.0 - t) ** 3 * (1.0 - 2.0 * t)


@dataclass
class CutoffFields:
    z: list
    rho: np.ndarray
    a: np.ndarray
    grad_a: list
    lap_a: np.ndarray


@dataclass(frozen=True)
class Cutoff:
    """Weight ``a(x) = phi(|x - y| / R)``; ``R = inf`` gives ``a = 1``."""

    R: float = math.inf
    y: Optional[tuple] = None

    @classmethod
    def full(cls, y=None) -> "Cutoff":
        return cls(math.inf, y)

    def at(self, y) -> "Cutoff":
        return Cutoff(self.R, tuple(float(c) for c in y))

    @property
    def is_full(self) -> bool:
        return math.isinf(self.R)

    def center(self, grid: Grid) -> tuple:
        return tuple(0.5 * s for s in grid.side) if self.y is None else self.y

    def fields(self, grid: Grid) -> CutoffFields:
        if not self.R > 0:
            raise ValueError("cutoff radius must be positive")
        if not self.is_full and 2.0 * self.R > 0.5 * min(grid.side):
            raise ValueError(
                f"support radius 2R={2 * self.R:g} does not fit in half the box "
                f"({0.5 * min(grid.side):g}); the weight would not be periodic"
            )
        z = grid.min_image(self.center(grid))
        z = [np.broadcast_to(c, grid.shape) for c in z]
        rho = np.sqrt(sum(c * c for c in z))
        if self.is_full:
            zero = np.zeros(grid.shape)
            return CutoffFields(z, rho, np.ones(grid.shape), [zero] * grid.n, zero)
        R = self.R
        r = rho / R
        a = phi(r)
        d1 = _dphi(r)
        d2 = _d2phi(r)
        safe = np.where(rho > 0, rho, 1.0)
        radial = np.where(rho > 0, d1 / (R * safe), 0.0)
        grad_a = [radial * c for c in z]
        lap_a = d2 / (R * R) + (grid.n - 1) * radial
        return CutoffFields(z, rho, a, grad_a, lap_a)


# ---------------------------------------------------------------- frames


def rotation_aligning(mom) -> np.ndarray:
    """Proper rotation ``Q`` with ``Q mom`` parallel to the first axis.

    Identity when ``mom`` vanishes or is already aligned.
    """
    mom = np.asarray(mom, dtype=float)
    n = mom.size
    norm = float(np.linalg.norm(mom))
    if n < 2 or norm == 0.0:
        return np.eye(n)
    mh = mom / norm
    e1 = np.zeros(n)
    e1[0] = 1.0
    w = mh - e1
    if float(w @ w) < 1e-30:
        return np.eye(n)
    H = np.eye(n) - 2.0 * np.outer(w, w) / float(w @ w)
    F = np.eye(n)
    F[-1, -1] = -1.0
    return F @ H


def orthogonal_direction(mom) -> np.ndarray:
    """Unit vector playing the role of the second axis once ``mom`` is the first."""
    Q = rotation_aligning(mom)
    return Q[1].copy()


def rotate_state(state: EnergyState, Q: np.ndarray, center=None, chunk: int = 1 << 22) -> EnergyState:
    """Resample ``x -> u(c + Q^T (x - c))`` from the trigonometric interpolant.

    Exact for band-limited fields that are negligible near the box boundary;
    the cost is ``O(N^2)`` so it is meant for modest grids.
    """
    g = state.grid
    Q = np.asarray(Q, dtype=float)
    c = np.array(g.side) / 2 if center is None else np.asarray(center, dtype=float)
    pts = np.stack([np.broadcast_to(m, g.shape).reshape(-1) for m in g.mesh], axis=1)
    src = (pts - c) @ Q + c
    kk = np.stack([np.broadcast_to(k, g.shape).reshape(-1) for k in np.meshgrid(*g.wavenumbers, indexing="ij")], axis=1)
    out = []
    for f in (state.u, state.v):
        fh = np.fft.fftn(f).reshape(-1) / g.size
        vals = np.empty(src.shape[0])
        step = max(1, chunk // kk.shape[0])
        for s in range(0, src.shape[0], step):
            ph = np.exp(1j * (src[s : s + step] @ kk.T))
            vals[s : s + step] = (ph @ fh).real
        out.append(vals.reshape(g.shape))
    return EnergyState(g, out[0], out[1])


# ---------------------------------------------------------------- local pieces


@dataclass
class _Pieces:
    g: Grid
    u: np.ndarray
    v: np.ndarray
    grad: list
    lap: np.ndarray
    H: list
    pot: np.ndarray  # |u|^(p+1)
    Q: np.ndarray
    LJ: np.ndarray


def _pieces(state: EnergyState, params: Params) -> _Pieces:
    g = state.grid
    uh = g.fft(state.u)
    grad = g.gradient(state.u, uh)
    lap = g.laplacian(state.u, uh)
    H = g.hessian(state.u, uh)
    u, v = state.u, state.v
    pot = np.abs(u) ** (params.p + 1)
    lam, m, q = params.lam, params.m, params.p + 1
    Q = -v * v + lap * lap + m * u * u + (2.0 * lam / q) * pot
    LJ = v * v - lap * lap - m * u * u - lam * pot
    return _Pieces(g, u, v, grad, lap, H, pot, Q, LJ)


def _matvec(C, vecs):
    n = len(vecs)
    return [sum(C[l, k] * vecs[k] for k in range(n) if C[l, k] != 0) for l in range(n)]


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _action_C(state: EnergyState, cutoff: Cutoff, C) -> float:
    g = state.grid
    cf = cutoff.fields(g)
    grad = g.gradient(state.u)
    Cz = _matvec(C, cf.z)
    return g.integrate(cf.a * _dot(Cz, grad) * state.v)


def _boundary_C(pc: _Pieces, cf: CutoffFields, C, ydot) -> np.ndarray:
    """Pointwise ``d/dt I_C`` minus its ``a = 1`` form, written with ``a - 1``, ``grad a``, ``Lap a`` factors."""
    n = pc.g.n
    C = np.asarray(C, dtype=float)
    ydot = np.asarray(ydot, dtype=float)
    Cz = _matvec(C, cf.z)
    Cy = C @ ydot
    Cga = _matvec(C, cf.grad_a)
    am1 = cf.a - 1.0
    ydga = _dot(ydot, cf.grad_a)
    Czgu = _dot(Cz, pc.grad)
    trC = float(np.trace(C))
    CH = sum(C[l, k] * pc.H[l][k] for l in range(n) for k in range(n) if C[l, k] != 0)
    Hga = [sum(pc.H[l][k] * cf.grad_a[k] for k in range(n)) for l in range(n)]
    out = -(ydga * Czgu + am1 * _dot(Cy, pc.grad)) * pc.v
    out = out + 0.5 * (_dot(cf.grad_a, Cz) + am1 * trC) * pc.Q
    out = out - (cf.lap_a * Czgu + 2.0 * _dot(Cga, pc.grad)) * pc.lap
    out = out - 2.0 * (am1 * CH + _dot(Cz, Hga)) * pc.lap
    return out


def _boundary_J(pc: _Pieces, cf: CutoffFields, ydot) -> np.ndarray:
    am1 = cf.a - 1.0
    ydga = _dot(np.asarray(ydot, dtype=float), cf.grad_a)
    return (
        am1 * pc.LJ
        - (cf.lap_a * pc.u + 2.0 * _dot(cf.grad_a, pc.grad)) * pc.lap
        - ydga * pc.u * pc.v
    )


def boundary_integrand(
    name: str,
    state: EnergyState,
    cutoff: Cutoff,
    params: Params,
    ydot=None,
    direction=None,
    pair: Optional[tuple] = None,
) -> np.ndarray:
    """Pointwise boundary integrand of an identity.

    ``name`` is one of ``"J"``, ``"A2"``, ``"Ia"``, ``"A"``, ``"Rij"``.
    Identically zero wherever ``|z| <= R``.
    """
    g = state.grid
    ydot = np.zeros(g.n) if ydot is None else np.asarray(ydot, dtype=float)
    pc = _pieces(state, params)
    cf = cutoff.fields(g)
    n = g.n
    if name == "J":
        return _boundary_J(pc, cf, ydot)
    if name in ("Ia", "A"):
        out = _boundary_C(pc, cf, np.eye(n), ydot)
        if name == "A":
            out = out + 0.5 * n * _boundary_J(pc, cf, ydot)
        return out
    if name == "A2":
        e = _direction(state, direction)
        return (
            _boundary_C(pc, cf, np.outer(e, e), ydot)
            + 0.5 * _boundary_J(pc, cf, ydot)
        )
    if name == "Rij":
        i, j = pair
        return _boundary_C(pc, cf, _rot_matrix(n, i, j), ydot)
    raise ValueError(f"unknown identity {name!r}")


# ---------------------------------------------------------------- J


def action_J(state: EnergyState, cutoff: Cutoff, params: Optional[Params] = None) -> float:
    """``J = int a u v``."""
    g = state.grid
    return g.integrate(cutoff.fields(g).a * state.u * state.v)


def rhs_dJ(state: EnergyState, cutoff: Cutoff, params: Params, ydot=None):
    """``(bulk, boundary, total)`` for ``dJ/dt``; bulk ``int (v^2 - (Lap u)^2 - m u^2 - lam |u|^(p+1))``."""
    g = state.grid
    ydot = np.zeros(g.n) if ydot is None else ydot
    pc = _pieces(state, params)
    bulk = g.integrate(pc.LJ)
    bnd = g.integrate(_boundary_J(pc, cutoff.fields(g), ydot))
    return bulk, bnd, bulk + bnd


# ---------------------------------------------------------------- directional


def _need_2d(state: EnergyState, what: str) -> None:
    if state.grid.n < 2:
        raise ValueError(f"{what} needs n >= 2: in one dimension the directional derivative is the full derivative")


def _direction(state: EnergyState, direction) -> np.ndarray:
    if direction is None:
        return orthogonal_direction(momentum(state))
    e = np.asarray(direction, dtype=float)
    return e / np.linalg.norm(e)


def action_I2(state: EnergyState, cutoff: Cutoff, direction=None) -> float:
    """``I2 = int (e . z) a (e . grad u) v``; ``e`` defaults to the unit vector orthogonal to ``Mom``."""
    _need_2d(state, "I2")
    e = _direction(state, direction)
    return _action_C(state, cutoff, np.outer(e, e))


def action_A2(state: EnergyState, cutoff: Cutoff, params: Optional[Params] = None, direction=None) -> float:
    """``A2 = I2 + J / 2``."""
    return action_I2(state, cutoff, direction) + 0.5 * action_J(state, cutoff)


def rhs_dA2(state: EnergyState, cutoff: Cutoff, params: Params, ydot=None, direction=None):
    """``(bulk, boundary, total)`` for ``dA2/dt``.

    bulk ``= -2 int (|grad d_e u|^2 + lam (p-1)/(4(p+1)) |u|^(p+1)) - (e . ydot)(e . Mom)``;
    the momentum term is kept even when ``e`` is orthogonal to ``Mom``.
    """
    _need_2d(state, "A2")
    g = state.grid
    n = g.n
    ydot = np.zeros(n) if ydot is None else np.asarray(ydot, dtype=float)
    e = _direction(state, direction)
    pc = _pieces(state, params)
    cf = cutoff.fields(g)
    grad_de_u = [sum(e[k] * pc.H[l][k] for k in range(n)) for l in range(n)]
    mom_e = g.integrate(pc.v * _dot(e, pc.grad))
    q = params.p + 1
    bulk = (
        -2.0 * g.integrate(sum(w * w for w in grad_de_u))
        - params.lam * (params.p - 1) / (2.0 * q) * g.integrate(pc.pot)
        - float(e @ ydot) * mom_e
    )
    dens = (
        _boundary_C(pc, cf, np.outer(e, e), ydot)
        + 0.5 * _boundary_J(pc, cf, ydot)
    )
    bnd = g.integrate(dens)
    return bulk, bnd, bulk + bnd


# ---------------------------------------------------------------- radial


def action_Ia(state: EnergyState, cutoff: Cutoff) -> float:
    """``Ia = int a (z . grad u) v``."""
    return _action_C(state, cutoff, np.eye(state.grid.n))


def rhs_dIa(state: EnergyState, cutoff: Cutoff, params: Params, ydot=None):
    """``(bulk, boundary, total)``; bulk ``(n/2) int Q - 2 int (Lap u)^2 - ydot . Mom``."""
    g = state.grid
    n = g.n
    ydot = np.zeros(n) if ydot is None else np.asarray(ydot, dtype=float)
    pc = _pieces(state, params)
    mom = np.array([g.integrate(pc.v * d) for d in pc.grad])
    bulk = 0.5 * n * g.integrate(pc.Q) - 2.0 * g.integrate(pc.lap * pc.lap) - float(ydot @ mom)
    bnd = g.integrate(_boundary_C(pc, cutoff.fields(g), np.eye(n), ydot))
    return bulk, bnd, bulk + bnd


def action_A(state: EnergyState, cutoff: Cutoff, params: Optional[Params] = None) -> float:
    """``A = Ia + (n/2) J``."""
    return action_Ia(state, cutoff) + 0.5 * state.grid.n * action_J(state, cutoff)


def rhs_dA(state: EnergyState, cutoff: Cutoff, params: Params, ydot=None):
    """``(bulk, boundary, total)``; bulk ``-2 int ((Lap u)^2 + lam n (p-1)/(4(p+1)) |u|^(p+1)) - ydot . Mom``."""
    g = state.grid
    n = g.n
    ydot = np.zeros(n) if ydot is None else np.asarray(ydot, dtype=float)
    pc = _pieces(state, params)
    cf = cutoff.fields(g)
    mom = np.array([g.integrate(pc.v * d) for d in pc.grad])
    q = params.p + 1
    bulk = (
        -2.0 * g.integrate(pc.lap * pc.lap)
        - params.lam * n * (params.p - 1) / (2.0 * q) * g.integrate(pc.pot)
        - float(ydot @ mom)
    )
    dens = _boundary_C(pc, cf, np.eye(n), ydot) + 0.5 * n * _boundary_J(pc, cf, ydot)
    bnd = g.integrate(dens)
    return bulk, bnd, bulk + bnd


# ---------------------------------------------------------------- rotational


def _rot_matrix(n: int, i: int, j: int) -> np.ndarray:
    if n < 2:
        raise ValueError("rotational action needs n >= 2")
    if i == j:
        raise ValueError("rotational action needs i != j")
    C = np.zeros((n, n))
    C[i, j] = 1.0
    C[j, i] = -1.0
    return C


def action_Rij(state: EnergyState, cutoff: Cutoff, i: int, j: int) -> float:
    """``R_ij = int a v (z_j d_i u - z_i d_j u)`` (axes 0-based)."""
    return _action_C(state, cutoff, _rot_matrix(state.grid.n, i, j))


def rhs_dRij(state: EnergyState, cutoff: Cutoff, params: Params, ydot=None, i: int = 0, j: int = 1):
    """``(bulk, boundary, total)``; bulk ``-ydot . Omega_ij``."""
    g = state.grid
    C = _rot_matrix(g.n, i, j)
    ydot = np.zeros(g.n) if ydot is None else np.asarray(ydot, dtype=float)
    pc = _pieces(state, params)
    omega = np.zeros(g.n)
    omega[j] = g.integrate(pc.v * pc.grad[i])
    omega[i] = -g.integrate(pc.v * pc.grad[j])
    bulk = -float(ydot @ omega)
    bnd = g.integrate(_boundary_C(pc, cutoff.fields(g), C, ydot))
    return bulk, bnd, bulk + bnd


# ---------------------------------------------------------------- compact path


def rhs_compact(
    name: str,
    state: EnergyState,
    cutoff: Cutoff,
    params: Params,
    ydot=None,
    direction=None,
    pair: Optional[tuple] = None,
) -> float:
    """Total derivative from the general vector-field formula, term grouping untouched."""
    g = state.grid
    n = g.n
    ydot = np.zeros(n) if ydot is None else np.asarray(ydot, dtype=float)
    pc = _pieces(state, params)
    cf = cutoff.fields(g)
    ydga = _dot(ydot, cf.grad_a)
    dJ = g.integrate(
        cf.a * pc.LJ
        - (cf.lap_a * pc.u + 2.0 * _dot(cf.grad_a, pc.grad)) * pc.lap
        - ydga * pc.u * pc.v
    )
    if name == "J":
        return dJ
    if name in ("Ia", "A"):
        C = np.eye(n)
    elif name == "A2":
        e = _direction(state, direction)
        C = np.outer(e, e)
    elif name == "Rij":
        C = _rot_matrix(n, *pair)
    else:
        raise ValueError(f"unknown identity {name!r}")
    Cz = _matvec(C, cf.z)
    # d_k X_l = a C_lk + (Cz)_l d_k a
    dX = [[cf.a * C[l, k] + Cz[l] * cf.grad_a[k] for k in range(n)] for l in range(n)]
    divX = sum(dX[l][l] for l in range(n))
    lapX = [cf.lap_a * Cz[l] + 2.0 * sum(C[l, k] * cf.grad_a[k] for k in range(n)) for l in range(n)]
    ydX = [sum(ydot[k] * dX[l][k] for k in range(n)) for l in range(n)]
    dens = (
        -_dot(ydX, pc.grad) * pc.v
        + 0.5 * divX * pc.Q
        - _dot(lapX, pc.grad) * pc.lap
        - 2.0 * sum(dX[l][k] * pc.H[k][l] for l in range(n) for k in range(n)) * pc.lap
    )
    dI = g.integrate(dens)
    if name == "Ia" or name == "Rij":
        return dI
    if name == "A":
        return dI + 0.5 * n * dJ
    return dI + 0.5 * dJ


# ---------------------------------------------------------------- residuals


def fd_derivative(series, h: float) -> np.ndarray:
    """Central difference on interior samples; endpoints are NaN."""
    s = np.asarray(series, dtype=float)
    out = np.full(s.shape, np.nan)
    if s.size >= 3:
        out[1:-1] = (s[2:] - s[:-2]) / (2.0 * h)
    return out


def identity_residual(action, rhs, h: float, energy) -> np.ndarray:
    """``|FD d/dt action - rhs| / max(|rhs|, E)`` on interior samples.

    Returns an array of length ``len(action) - 2``.
    """
    action = np.asarray(action, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if action.size < 3:
        raise ValueError("identity_residual needs at least 3 samples")
    E = np.broadcast_to(np.asarray(energy, dtype=float), action.shape)
    fd = fd_derivative(action, h)[1:-1]
    r = rhs[1:-1]
    num = np.abs(fd - r)
    scale = np.maximum(np.abs(r), E[1:-1])
    with np.errstate(invalid="ignore", divide="ignore"):
        res = np.where(num == 0, 0.0, num / scale)
    return res


def virial_series(
    traj,
    R: float,
    centers=None,
    ydots=None,
    direction=None,
    pairs: Sequence[tuple] = (),
) -> dict:
    """Action values, rhs and residual columns for every snapshot of ``traj``.

    ``centers``/``ydots`` default to a fixed cutoff at the box centre with
    ``ydot = 0``.  ``direction`` fixes the ``A2`` axis for the whole run;
    by default it is taken orthogonal to the initial momentum.
    """
    params = traj.params
    g = traj.grid
    K = len(traj.states)
    h = traj.cadence
    if centers is None:
        centers = np.tile(np.array(g.side) / 2, (K, 1))
    if ydots is None:
        ydots = np.zeros((K, g.n))
    base = Cutoff(R)
    if g.n >= 2 and direction is None:
        direction = orthogonal_direction(momentum(traj.states[0]))
    cols: dict = {k: np.zeros(K) for k in ("J", "Ia", "A", "dA_rhs", "dA_rhs_bulk", "dA_rhs_bnd")}
    if g.n >= 2:
        for k in ("I2", "A2", "dA2_rhs_bulk", "dA2_rhs_bnd", "dA2_rhs"):
            cols[k] = np.zeros(K)
    for (i, j) in pairs:
        cols[f"R{i + 1}{j + 1}"] = np.zeros(K)
        cols[f"dR{i + 1}{j + 1}_rhs"] = np.zeros(K)
    energy = np.zeros(K)
    for k, st in enumerate(traj.states):
        cut = base.at(centers[k])
        yd = ydots[k]
        energy[k] = total_energy(st, params)
        cols["J"][k] = action_J(st, cut)
        cols["Ia"][k] = action_Ia(st, cut)
        cols["A"][k] = cols["Ia"][k] + 0.5 * g.n * cols["J"][k]
        b, d, t = rhs_dA(st, cut, params, yd)
        cols["dA_rhs_bulk"][k], cols["dA_rhs_bnd"][k], cols["dA_rhs"][k] = b, d, t
        if g.n >= 2:
            cols["I2"][k] = action_I2(st, cut, direction)
            cols["A2"][k] = cols["I2"][k] + 0.5 * cols["J"][k]
            b, d, t = rhs_dA2(st, cut, params, yd, direction)
            cols["dA2_rhs_bulk"][k], cols["dA2_rhs_bnd"][k], cols["dA2_rhs"][k] = b, d, t
        for (i, j) in pairs:
            cols[f"R{i + 1}{j + 1}"][k] = action_Rij(st, cut, i, j)
            cols[f"dR{i + 1}{j + 1}_rhs"][k] = rhs_dRij(st, cut, params, yd, i, j)[2]

    def res(action, rhs):
        out = np.full(K, np.nan)
        if K >= 3:
            out[1:-1] = identity_residual(action, rhs, h, energy)
        return out

    cols["dA_fd"] = fd_derivative(cols["A"], h)
    cols["res_A"] = res(cols["A"], cols["dA_rhs"])
    if g.n >= 2:
        cols["dA2_fd"] = fd_derivative(cols["A2"], h)
        cols["res_A2"] = res(cols["A2"], cols["dA2_rhs"])
    for (i, j) in pairs:
        tag = f"{i + 1}{j + 1}"
        cols[f"res_R{tag}"] = res(cols[f"R{tag}"], cols[f"dR{tag}_rhs"])
    return cols


# ---------------------------------------------------------------- drift reports


def affine_envelope(t, f) -> tuple[float, float]:
    """Tightest ``C + eps t >= f`` with ``C, eps >= 0``, minimising its mean over the run."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    span = float(t[-1] - t[0]) if t.size > 1 else 0.0
    t0 = t - t[0]
    res = linprog(
        c=[1.0, 0.5 * span],
        A_ub=np.stack([-np.ones_like(t0), -t0], axis=1),
        b_ub=-f,
        bounds=[(0, None), (0, None)],
        method="highs",
    )
    if not res.success:
        return float(np.max(f)), 0.0
    return float(res.x[0]), float(res.x[1])


def _slope(t, f) -> float:
    t = np.asarray(t, dtype=float)
    if t.size < 2:
        return 0.0
    return float(np.polyfit(t, np.asarray(f, dtype=float), 1)[0])


def momentum_growth_check(traj, y, tol: float = 1e-10) -> dict:
    """Compares ``y . Mom`` with ``-2 int_0^t ((Lap u)^2 + lam n (p-1)/(4(p+1)) |u|^(p+1))``."""
    from scipy.integrate import cumulative_trapezoid

    params = traj.params
    g = traj.grid
    times = np.asarray(traj.times)
    y = np.asarray(y, dtype=float)
    mom = momentum(traj.states[0])
    E = total_energy(traj.states[0], params)
    if E == 0 or np.linalg.norm(mom) <= tol * E:
        return {"applicable": False, "reason": "momentum vanishes"}
    q = params.p + 1
    coeff = params.lam * g.n * (params.p - 1) / (4.0 * q)
    bulk = []
    for st in traj.states:
        lap = g.laplacian(st.u)
        bulk.append(g.integrate(lap * lap) + coeff * g.integrate(np.abs(st.u) ** q))
    cum = cumulative_trapezoid(np.array(bulk), times, initial=0.0)
    ymom = y @ mom
    gap = np.abs(ymom - ymom[0] + 2.0 * cum)
    C, eps = affine_envelope(times, gap)
    if np.std(ymom) > 0 and np.std(cum) > 0:
        corr = float(np.corrcoef(-ymom, cum)[0, 1])
    else:
        corr = float("nan")
    mhat = mom / np.linalg.norm(mom)
    return {
        "applicable": True,
        "times": times.tolist(),
        "y_dot_mom": ymom.tolist(),
        "bulk_integral": cum.tolist(),
        "envelope_C": C,
        "envelope_eps": eps,
        "correlation": corr,
        "longitudinal_slope": _slope(times, y @ mhat),
        "y_dot_mom_slope": _slope(times, ymom),
    }


def transverse_drift_check(traj, y, Z, tol: float = 1e-10) -> dict:
    """Envelope ``|Z . y(t)| <= C + eps t`` for a unit ``Z`` orthogonal to ``Mom``."""
    params = traj.params
    times = np.asarray(traj.times)
    y = np.asarray(y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    mom = momentum(traj.states[0])
    E = total_energy(traj.states[0], params)
    if E == 0 or np.linalg.norm(mom) <= tol * E:
        return {"applicable": False, "reason": "momentum vanishes"}
    if abs(float(Z @ mom)) > 1e-8 * np.linalg.norm(mom) * np.linalg.norm(Z):
        raise ValueError("Z must be orthogonal to the momentum")
    Z = Z / np.linalg.norm(Z)
    zy = y @ Z
    drift = np.abs(zy - zy[0])
    C, eps = affine_envelope(times, drift)
    return {
        "applicable": True,
        "times": times.tolist(),
        "transverse": zy.tolist(),
        "envelope_C": C,
        "envelope_eps": eps,
    }
