import math

import numpy as np
import pytest

from beamscatter.bernstein import FAMILIES, BernsteinFit, bernstein_range, bernstein_suite, random_annulus_fields
from beamscatter.grid import Grid


def test_range_fits_between_fundamental_and_cutoff():
    g = Grid.cube(2, 128, 64.0)
    Ns = bernstein_range(g)
    assert Ns == [0.25, 0.5, 1.0]
    for N in Ns:
        assert N / 2 >= 2 * math.pi / 64.0 and 4 * N <= (2 / 3) * math.pi * 2


def test_annulus_fields_are_real_and_band_limited(rng):
    g = Grid.cube(2, 64, 32.0)
    f = random_annulus_fields(g, 0.5, 3, rng)
    assert f.shape == (3, 64, 64) and f.dtype == float
    for x in f:
        amp = np.abs(g.fft(x))
        outside = (g.kabs < 0.25) | (g.kabs > 2.0)
        assert np.all(amp[outside] <= 1e-10 * amp.max())
        assert abs(x.mean()) <= 1e-12
    with pytest.raises(ValueError):
        random_annulus_fields(g, 1e-3, 1, rng)


def test_fit_spread():
    assert BernsteinFit("high", 1.0, 2.0, [1, 2], [1.0, 4.0]).spread == 4.0
    assert BernsteinFit("high", 1.0, 2.0, [1, 2], [0.0, 4.0]).spread == math.inf


def test_small_suite_passes():
    g = Grid.cube(2, 64, 32.0)
    out = bernstein_suite(g, count=6, s_values=(1.0,), chunk=4)
    assert {r["family"] for r in out["fits"]} == set(FAMILIES)
    assert len(out["fits"]) == len(FAMILIES) * 2
    assert out["passed"] and out["max_spread"] <= 10.0
    for r in out["fits"]:
        assert len(r["constants"]) == len(out["N"])
        assert all(c > 0 for c in r["constants"])


def test_suite_needs_two_scales():
    with pytest.raises(ValueError, match="coarse"):
        bernstein_suite(Grid.cube(2, 16, 32.0), count=2)
