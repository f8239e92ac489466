import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamscatter.grid import Grid
from beamscatter.linear import EnergyState, Params
from beamscatter.solver import integrate, momentum
from beamscatter.virial import (
    Cutoff,
    action_I2,
    action_J,
    action_Rij,
    affine_envelope,
    boundary_integrand,
    fd_derivative,
    identity_residual,
    momentum_growth_check,
    orthogonal_direction,
    phi,
    rhs_compact,
    rhs_dA,
    rhs_dA2,
    rhs_dIa,
    rhs_dJ,
    rhs_dRij,
    rotate_state,
    rotation_aligning,
    transverse_drift_check,
    virial_series,
)
from beamscatter.virial import _d2phi, _dphi

from conftest import band_limited_state, gaussian_state

PRM = Params(1.0, 1.0, 3.0)
NAMES = ("J", "Ia", "A", "A2", "Rij")


def test_phi_profile_and_derivatives():
    r = np.linspace(0, 3, 3001)
    p = phi(r)
    assert np.all(p[r <= 1] == 1) and np.all(p[r >= 2] == 0)
    assert np.all(np.diff(p) <= 0)
    h = 1e-5
    mid = np.linspace(0.5, 2.5, 41)
    assert np.allclose(_dphi(mid), (phi(mid + h) - phi(mid - h)) / (2 * h), atol=1e-8)
    assert np.allclose(_d2phi(mid), (_dphi(mid + h) - _dphi(mid - h)) / (2 * h), atol=1e-7)


def test_cutoff_fields_match_spectral_derivatives():
    # the cutoff is only C^4, so spectral derivatives converge algebraically
    errs = []
    for n in (128, 256):
        g = Grid.cube(2, n, 64.0)
        cf = Cutoff(8.0).fields(g)
        assert np.all(cf.a[cf.rho <= 8.0] == 1.0)
        grad = g.gradient(cf.a)
        e_grad = max(np.max(np.abs(a - b)) for a, b in zip(grad, cf.grad_a))
        errs.append(max(e_grad, np.max(np.abs(g.laplacian(cf.a) - cf.lap_a))))
    assert errs[0] < 1e-3
    assert errs[1] < errs[0] / 4


def test_cutoff_must_fit():
    g = Grid.cube(2, 32, 32.0)
    with pytest.raises(ValueError, match="2R"):
        Cutoff(9.0).fields(g)
    full = Cutoff().fields(g)
    assert np.all(full.a == 1.0) and all(np.all(d == 0) for d in full.grad_a)


@given(seed=st.integers(0, 2**32 - 1), R=st.floats(2.0, 7.5), name=st.sampled_from(NAMES))
def test_boundary_integrands_vanish_in_ball(seed, R, name):
    g = Grid.cube(2, 32, 32.0)
    rng = np.random.default_rng(seed)
    s = band_limited_state(g, rng)
    ydot = rng.standard_normal(2)
    cut = Cutoff(R, tuple(rng.uniform(0, 32, 2)))
    dens = boundary_integrand(name, s, cut, PRM, ydot, direction=(0.6, 0.8), pair=(0, 1))
    inside = cut.fields(g).rho <= R
    assert np.all(dens[inside] == 0.0)
    assert np.any(dens[~inside] != 0.0)


@given(seed=st.integers(0, 2**32 - 1), R=st.sampled_from([3.0, 6.0, math.inf]))
def test_expansions_match_compact_formula(seed, R):
    g = Grid.cube(2, 32, 32.0)
    rng = np.random.default_rng(seed)
    s = band_limited_state(g, rng)
    ydot = rng.standard_normal(2)
    cut = Cutoff(R, (16.0, 16.0))
    e = (0.6, 0.8)
    pairs = {
        "J": rhs_dJ(s, cut, PRM, ydot)[2],
        "Ia": rhs_dIa(s, cut, PRM, ydot)[2],
        "A": rhs_dA(s, cut, PRM, ydot)[2],
        "A2": rhs_dA2(s, cut, PRM, ydot, e)[2],
        "Rij": rhs_dRij(s, cut, PRM, ydot, 0, 1)[2],
    }
    for name, val in pairs.items():
        ref = rhs_compact(name, s, cut, PRM, ydot, direction=e, pair=(0, 1))
        scale = max(abs(ref), 1.0)
        assert abs(val - ref) <= 1e-10 * scale, name


def test_full_cutoff_has_no_boundary_term(grid2, rng):
    s = band_limited_state(grid2, rng)
    for fn in (rhs_dJ, rhs_dIa, rhs_dA):
        assert fn(s, Cutoff(), PRM)[1] == 0.0
    assert rhs_dA2(s, Cutoff(), PRM, None, (1.0, 0.0))[1] == 0.0


def test_linear_J_identity_by_finite_differences():
    g = Grid.cube(2, 64, 64.0)
    s0 = gaussian_state(g, 4.0)
    prm = Params(1.0, 0.0, 3.0)
    traj = integrate(s0, prm, 1e-3, 0.2, stride=10)
    cut = Cutoff()
    J = [action_J(st, cut) for st in traj.states]
    rhs = [rhs_dJ(st, cut, prm)[2] for st in traj.states]
    E = [0.5 * g.integrate(st.v ** 2 + g.laplacian(st.u) ** 2 + st.u ** 2) for st in traj.states]
    res = identity_residual(J, rhs, traj.cadence, E)
    assert res.size == len(J) - 2
    assert np.max(res) <= 1e-4


def test_virial_series_residuals_small_on_nonlinear_run():
    g = Grid.cube(2, 64, 64.0)
    u = gaussian_state(g, 4.0).u
    s0 = EnergyState(g, u, -0.3 * g.gradient(u)[0])
    traj = integrate(s0, PRM, 2e-3, 0.4, stride=10)
    cols = virial_series(traj, 12.0, pairs=[(0, 1)])
    for key in ("res_A", "res_A2", "res_R12"):
        assert np.nanmax(cols[key]) <= 1e-3, key
    assert np.isnan(cols["dA_fd"][0]) and np.isnan(cols["dA_fd"][-1])


def test_rotation_aligning_is_proper():
    for mom in ([1.0, 2.0], [-3.0, 0.5, 1.0], [0.0, 0.0]):
        Q = rotation_aligning(mom)
        assert np.allclose(Q @ Q.T, np.eye(len(mom)))
        assert np.linalg.det(Q) == pytest.approx(1.0)
        if np.linalg.norm(mom) > 0:
            out = Q @ np.array(mom)
            assert out[0] == pytest.approx(np.linalg.norm(mom)) and np.allclose(out[1:], 0)
    e = orthogonal_direction([3.0, 4.0])
    assert e @ np.array([3.0, 4.0]) == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(e, [-0.8, 0.6])


def test_frame_consistency_under_rotation():
    g = Grid.cube(2, 32, 32.0)
    u = gaussian_state(g, 2.5).u
    gx, gy = g.gradient(u)
    s = EnergyState(g, u, -(0.6 * gx + 0.3 * gy))
    mom = momentum(s)
    Q = rotation_aligning(mom)
    rs = rotate_state(s, Q)
    mom_r = momentum(rs)
    assert mom_r[0] == pytest.approx(np.linalg.norm(mom), rel=1e-8)
    assert abs(mom_r[1]) <= 1e-8 * np.linalg.norm(mom)
    cut = Cutoff(6.0)
    a = action_I2(s, cut, orthogonal_direction(mom))
    b = action_I2(rs, cut, (0.0, 1.0))
    assert a == pytest.approx(b, rel=1e-8)
    assert action_Rij(s, cut, 0, 1) == pytest.approx(action_Rij(rs, cut, 0, 1), rel=1e-8, abs=1e-10)


def test_affine_envelope_exact_line():
    t = np.linspace(0, 4, 9)
    C, eps = affine_envelope(t, 1.0 + 2.0 * t)
    assert C == pytest.approx(1.0, abs=1e-9) and eps == pytest.approx(2.0, abs=1e-9)
    C, eps = affine_envelope(t, np.zeros_like(t))
    assert C == pytest.approx(0.0, abs=1e-12) and eps == pytest.approx(0.0, abs=1e-12)


def test_fd_derivative_of_quadratic():
    t = np.linspace(0, 1, 11)
    d = fd_derivative(t ** 2, 0.1)
    assert np.allclose(d[1:-1], 2 * t[1:-1])
    assert np.isnan(d[0]) and np.isnan(d[-1])


def test_drift_checks_need_momentum():
    g = Grid.cube(2, 32, 32.0)
    traj = integrate(gaussian_state(g, 3.0), PRM, 0.05, 0.2)
    y = np.zeros((len(traj), 2))
    assert momentum_growth_check(traj, y)["applicable"] is False
    assert transverse_drift_check(traj, y, (0.0, 1.0))["applicable"] is False


def test_transverse_direction_must_be_orthogonal():
    g = Grid.cube(2, 32, 32.0)
    u = gaussian_state(g, 3.0).u
    s = EnergyState(g, u, -g.gradient(u)[0])
    traj = integrate(s, PRM, 0.05, 0.2)
    with pytest.raises(ValueError, match="orthogonal"):
        transverse_drift_check(traj, np.zeros((len(traj), 2)), (1.0, 0.0))
