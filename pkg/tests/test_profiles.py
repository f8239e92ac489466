import math
from pathlib import Path

import numpy as np
import pytest

from beamscatter.grid import Grid
from beamscatter.linear import EnergyState, evolve_linear, free_energy
from beamscatter.profiles import (
    Core,
    ProfileItem,
    algebraic_bump,
    best_core_search,
    energy_tail,
    extract_profiles,
    lp_decoupling_check,
    noise_state,
    orthogonality_matrix,
    place,
    pythagorean_check,
    synthesize_sequence,
    synthetic_profiles,
)
from beamscatter.virial import phi

M = 1.0


@pytest.fixture(scope="module")
def grid():
    return Grid.cube(2, 64, 64.0)


def compact_bump(grid, amplitude=1.0):
    """Supported in the ball of radius 3 around the origin, the search radius used below."""
    u = amplitude * phi(grid.distance([0.0, 0.0]) / 1.5)
    return EnergyState(grid, u, np.zeros(grid.shape))


def test_core_validation():
    with pytest.raises(ValueError):
        Core(math.nan, (0.0, 0.0))
    assert Core(1.0, (0, 0)).separation(Core(-1.0, (3, 4))) == pytest.approx(7.0)


def test_place_is_shift_then_translate(grid):
    V = algebraic_bump(grid, 1.5)
    out = place(V, Core(0.7, (10.0, 20.0)), M)
    back = evolve_linear(out.translate((-10.0, -20.0)), -0.7, M)
    assert np.max(np.abs(back.u - V.u)) <= 1e-12


def test_single_exact_profile_recovered(grid):
    V = compact_bump(grid)
    core = Core(0.0, (30.0, 34.0))
    seq = [place(V, core, M)]
    profiles, rem, _ = extract_profiles(seq, np.arange(-1.0, 1.01, 0.25), 3.0, M)
    assert len(profiles) == 1
    found = profiles[0].cores[0]
    assert found.S == 0.0
    assert np.allclose(found.Y, core.Y, atol=1e-6)
    chk = pythagorean_check(seq, profiles, rem, M)
    assert chk["defects"][0] <= 1e-6 and chk["passed"]
    assert free_energy(rem[0], M) <= 1e-10 * free_energy(seq[0], M)


def test_no_profiles_means_no_defect(grid, rng):
    seq = [noise_state(grid, 1.0, M, rng) for _ in range(2)]
    chk = pythagorean_check(seq, [], seq, M)
    assert chk["defects"] == [0.0, 0.0]


def test_disjoint_bumps_decouple(grid):
    V = compact_bump(grid)
    profs = [ProfileItem(V, [Core(0.0, (16.0, 16.0))]), ProfileItem(V * 2.0, [Core(0.0, (48.0, 40.0))])]
    seq = synthesize_sequence(profs, 0.0, M)
    out = lp_decoupling_check(seq, profs, 0.0, 3.0, M)
    assert out["q"] == 4.0 and out["defects"][0] <= 1e-10


def test_orthogonality_matrix(grid):
    V = compact_bump(grid)
    same = [ProfileItem(V, [Core(0.0, (5.0, 5.0))]), ProfileItem(V, [Core(0.0, (5.0, 5.0))])]
    assert orthogonality_matrix(same)["min_separation_last"] == 0.0
    timed = [ProfileItem(V, [Core(0.0, (5.0, 5.0))]), ProfileItem(V, [Core(2.5, (5.0, 5.0))])]
    out = orthogonality_matrix(timed)
    assert out["min_separation_last"] == 2.5
    assert np.array_equal(out["separations"][:, :, 0], out["separations"][:, :, 0].T)
    with pytest.raises(ValueError):
        orthogonality_matrix(same[:1])


def test_noise_state_energy_and_band(grid, rng):
    n = noise_state(grid, 0.3, M, rng)
    assert free_energy(n, M) == pytest.approx(0.3, rel=1e-12)
    amp = np.abs(grid.fft(n.u))
    hi = (2.0 / 3.0) * min(grid.nyquist)
    assert np.all(amp[(grid.kabs < hi / 2) | (grid.kabs > hi)] <= 1e-12 * amp.max())
    assert energy_tail(n, hi / 4, M) == pytest.approx(1.0, abs=1e-12)
    assert free_energy(noise_state(grid, 0.0, M, rng), M) == 0.0


def test_synthetic_profile_layout(grid):
    profs = synthetic_profiles(grid, count=3, length=4)
    assert [p.cores[0].S for p in profs] == [0.0, 1.0, -1.0]
    centre = np.array([32.0, 32.0])
    for p in profs:
        radii = [np.linalg.norm(np.array(c.Y) - centre) for c in p.cores]
        assert np.allclose(radii, [9.0, 11.0, 13.0, 15.0])
    amps = [p.data.u.max() for p in profs]
    assert np.allclose(amps, [1.0, 1.2, 1.4])
    with pytest.raises(ValueError):
        synthetic_profiles(Grid.cube(1, 64, 64.0))


def test_synthesis_is_order_independent(grid):
    profs = synthetic_profiles(grid, length=2)
    a = synthesize_sequence(profs, 0.01, M, seed=3)
    b = synthesize_sequence(profs[::-1], 0.01, M, seed=3)
    for x, y in zip(a, b):
        assert np.max(np.abs(x.u - y.u)) <= 1e-13
        assert free_energy(x - y, M) <= 1e-24


def test_synthesis_noise_energy(grid):
    V = compact_bump(grid)
    seq = synthesize_sequence([], 0.2, M, grid=grid, seed=1)
    assert free_energy(seq[0], M) == pytest.approx(0.04, rel=1e-12)
    with pytest.raises(ValueError):
        synthesize_sequence([], 0.2, M)
    bad = [ProfileItem(V, [Core(0.0, (5.0, 5.0))]), ProfileItem(V, [Core(0.0, (5.0, 5.0)), Core(0.0, (6.0, 6.0))])]
    with pytest.raises(ValueError, match="one core"):
        synthesize_sequence(bad, 0.0, M)


def test_synthesis_guards(grid):
    V = compact_bump(grid)
    with pytest.raises(ValueError, match="wrap-around"):
        synthesize_sequence([ProfileItem(V, [Core(50.0, (5.0, 5.0))])], 0.0, M)
    close = [ProfileItem(V, [Core(0.0, (5.0, 5.0))]), ProfileItem(V, [Core(0.0, (7.0, 5.0))])]
    with pytest.raises(ValueError, match="apart"):
        synthesize_sequence(close, 0.0, M, min_gap=4.0)


def test_search_finds_time_shift(grid):
    V = algebraic_bump(grid, 1.5)
    w = place(V, Core(0.5, (20.0, 40.0)), M)
    res = best_core_search(w, np.arange(-1.0, 1.01, 0.25), 3.0, M)
    assert res.core.S == 0.5
    assert np.allclose(res.core.Y, (20.0, 40.0), atol=1e-6)
    with pytest.raises(ValueError):
        best_core_search(w, [], 3.0, M)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_round_trip_across_noise_seeds(seed):
    from beamscatter.cli import experiment_settings, profile_round_trip
    from beamscatter.config import parse_config

    config = parse_config(Path(__file__).resolve().parent.parent / "configs" / "profiles.ini")
    s = experiment_settings("profiles", config)
    res = profile_round_trip(config.build_grid(), config.params.m, config.params.p, seed, s)
    assert res["cores_recovered"] and res["energies_recovered"]
    assert res["pythagorean"]["passed"] and res["decoupling"]["decreasing"]
