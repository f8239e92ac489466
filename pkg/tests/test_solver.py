
import numpy as np
import pytest

from beamscatter.checkpoint import CheckpointError, read_checkpoint, write_checkpoint
from beamscatter.grid import Grid
from beamscatter.linear import EnergyState, Params, evolve_linear, free_energy
from beamscatter.solver import (
    WraparoundError,
    angular_momentum,
    angular_momentum_table,
    check_budget,
    integrate,
    momentum,
    nonlinear_substep,
    omega_vector,
    potential_energy,
    strang_step,
    total_energy,
)

from conftest import band_limited_state, gaussian_state


def test_linear_case_is_exact(grid2, rng):
    s = band_limited_state(grid2, rng)
    prm = Params(1.0, 0.0, 3.0)
    traj = integrate(s, prm, 0.1, 2.0, stride=5)
    exact = evolve_linear(s, 2.0, 1.0)
    assert np.allclose(traj.states[-1].u, exact.u, atol=1e-12)
    assert np.allclose(strang_step(s, 0.1, prm).u, evolve_linear(s, 0.1, 1.0).u)


def test_nonlinear_substep_is_exact_pointwise_flow(grid2):
    s = gaussian_state(grid2, 3.0)
    prm = Params(1.0, 2.0, 3.0)
    out = nonlinear_substep(s, 0.5, prm, dealias=False)
    assert np.array_equal(out.u, s.u)
    assert np.allclose(out.v, s.v - 0.5 * 2.0 * s.u ** 3)


def test_merged_stepper_matches_strang_composition():
    g = Grid.cube(2, 32, 32.0)
    s = gaussian_state(g, 3.0)
    prm = Params(1.0, 1.0, 3.0)
    ref = s
    for _ in range(4):
        ref = strang_step(ref, 0.05, prm)
    out = integrate(s, prm, 0.05, 0.2, stride=4).states[-1]
    assert np.allclose(out.u, ref.u, atol=1e-12)
    assert np.allclose(out.v, ref.v, atol=1e-12)


def test_energy_and_momentum_conserved_short_run():
    g = Grid.cube(2, 64, 64.0)
    u = gaussian_state(g, 4.0).u
    v = -0.5 * g.gradient(u)[0]
    s = EnergyState(g, u, v)
    prm = Params(1.0, 1.0, 3.0)
    traj = integrate(s, prm, 0.005, 1.0, stride=50)
    E = [total_energy(st, prm) for st in traj.states]
    # O(dt^2) splitting error: about 2.6e-6 relative at dt = 0.005
    assert max(abs(e - E[0]) for e in E) <= 1e-5 * E[0]
    P = np.array([momentum(st) for st in traj.states])
    assert np.max(np.abs(P - P[0])) <= 1e-10 * E[0]


def test_time_reversibility():
    g = Grid.cube(2, 32, 32.0)
    s = gaussian_state(g, 3.0)
    prm = Params(1.0, 1.0, 3.0)
    fwd = integrate(s, prm, 0.01, 0.5).states[-1]
    back = integrate(fwd.flip(), prm, 0.01, 0.5).states[-1].flip()
    assert np.allclose(back.u, s.u, atol=1e-10)


def test_forcing_enters_velocity():
    g = Grid.cube(2, 16, 16.0)
    s = EnergyState.zeros(g)
    prm = Params(1.0, 0.0, 3.0)
    shape = gaussian_state(g, 2.0).u
    traj = integrate(s, prm, 0.01, 0.1, forcing=lambda t: shape)
    v = traj.states[-1].v
    # Duhamel for constant forcing at short times: v ~ t * f
    assert np.allclose(v, 0.1 * shape, atol=5e-3 * np.max(shape))


def test_budget_errors_report_numbers():
    g = Grid.cube(2, 128, 64.0)
    with pytest.raises(WraparoundError, match=r"v_max\*T = .* > L/2 = 32"):
        check_budget(g, 1.0, 100.0)
    assert check_budget(g, 1.0, 100.0, allow=True) > 0
    s = gaussian_state(g, 3.0)
    with pytest.raises(WraparoundError):
        integrate(s, Params(), 0.1, 100.0)


def test_integrate_argument_checks(grid2):
    s = EnergyState.zeros(grid2)
    with pytest.raises(ValueError):
        integrate(s, Params(), 0.0, 1.0)
    with pytest.raises(ValueError):
        integrate(s, Params(), 0.3, 1.0)
    with pytest.raises(ValueError):
        integrate(s, Params(), 0.1, 1.0, stride=0)


def test_overflow_guard(grid2):
    s = EnergyState(grid2, np.full(grid2.shape, 1e3), np.zeros(grid2.shape))
    with pytest.raises(OverflowError):
        nonlinear_substep(s, 0.1, Params(1.0, 1.0, 300.0))


def test_trajectory_lookup(grid2):
    traj = integrate(EnergyState.zeros(grid2), Params(), 0.1, 1.0, stride=2)
    assert traj.cadence == pytest.approx(0.2)
    assert len(traj) == 6
    assert traj.index_of(0.6) == 3
    with pytest.raises(ValueError, match="snapshot"):
        traj.at(0.5)


def test_potential_energy_closed_form():
    g = Grid.cube(2, 16, 4.0)
    s = EnergyState(g, np.full(g.shape, 2.0), np.zeros(g.shape))
    prm = Params(1.0, 3.0, 3.0)
    assert potential_energy(s, prm) == pytest.approx(3.0 / 4.0 * 16.0 * 16.0)
    assert total_energy(s, prm) == pytest.approx(free_energy(s, 1.0) + 192.0)


def test_angular_momentum_structure(rng):
    g = Grid.cube(3, 8, 8.0)
    s = band_limited_state(g, rng, frac=0.5)
    mom = momentum(s)
    tab = angular_momentum_table(s)
    assert np.allclose(tab, -tab.T)
    assert angular_momentum(s, 0, 2) == pytest.approx(mom[0])
    assert angular_momentum(s, 2, 0) == pytest.approx(-mom[0])
    vec = omega_vector(s, 0, 1)
    assert vec[1] == pytest.approx(mom[0]) and vec[0] == pytest.approx(-mom[1]) and vec[2] == 0
    with pytest.raises(ValueError):
        angular_momentum(s, 1, 1)
    with pytest.raises(ValueError):
        angular_momentum(EnergyState.zeros(Grid((8,), (1.0,))), 0, 1)


def test_checkpoint_round_trip(tmp_path, rng):
    g = Grid((16, 8), (3.0, 5.0))
    s = band_limited_state(g, rng, frac=0.5)
    prm = Params(2.0, 0.5, 5.0)
    path = tmp_path / "s.ckpt"
    write_checkpoint(path, s, prm, 1.25)
    back, p2, t = read_checkpoint(path)
    assert back.grid == g and p2 == prm and t == 1.25
    assert np.array_equal(back.u, s.u) and np.array_equal(back.v, s.v)
    raw = path.read_bytes()
    assert raw[:4] == b"BEAM"
    (tmp_path / "bad.ckpt").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CheckpointError):
        read_checkpoint(tmp_path / "bad.ckpt")
    (tmp_path / "short.ckpt").write_bytes(raw[:-8])
    with pytest.raises(CheckpointError):
        read_checkpoint(tmp_path / "short.ckpt")
