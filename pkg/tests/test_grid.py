import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beamscatter.grid import (
    Field,
    Grid,
    LPRangeWarning,
    apply_multiplier,
    dyadic_range,
    fractional_derivative,
    fractional_symbol,
    lp_multiplier,
    lp_norm,
    lp_project,
    psi,
    sobolev_norm,
    to_physical,
    to_spectral,
)


def test_rejects_bad_grids():
    with pytest.raises(ValueError):
        Grid((12, 16), (1.0, 1.0))
    with pytest.raises(ValueError):
        Grid((4,), (1.0,))
    with pytest.raises(ValueError):
        Grid((16,), (0.0,))
    with pytest.raises(ValueError):
        Grid((16, 16), (1.0,))
    with pytest.raises(ValueError):
        Grid((8,) * 5, (1.0,) * 5)


def test_wavenumber_lattice_symmetric_except_nyquist():
    g = Grid((16,), (2 * math.pi,))
    k = np.sort(g.wavenumbers[0])
    assert k[0] == pytest.approx(-8) and k[-1] == pytest.approx(7)
    assert np.allclose(k[1:], -k[1:][::-1], atol=1e-12)


def test_cell_volume_and_nyquist():
    g = Grid((16, 32), (4.0, 8.0))
    assert g.cell_volume == pytest.approx(0.25 * 0.25)
    assert g.nyquist == pytest.approx((4 * math.pi, 4 * math.pi))


def test_l2_norm_of_cosine_closed_form():
    g = Grid.cube(2, 32, 2 * math.pi)
    f = Field.from_function(g, lambda x, y: np.cos(x) + 0 * y)
    assert lp_norm(f, 2) == pytest.approx(math.sqrt(2 * math.pi ** 2), rel=1e-13)
    assert lp_norm(f, 2) == pytest.approx(4.4429, abs=1e-4)


def test_constant_field_norm_is_sqrt_volume():
    g = Grid((16, 8), (3.0, 5.0))
    f = Field.from_function(g, lambda x, y: 1.0 + 0 * x * y)
    assert lp_norm(f, 2) == pytest.approx(math.sqrt(15.0), rel=1e-14)
    assert lp_norm(f, math.inf) == 1.0


def test_lp_norm_rejects_spectral_and_small_q(grid2, rng):
    f = Field(grid2, rng.standard_normal(grid2.shape))
    with pytest.raises(ValueError):
        lp_norm(to_spectral(f), 2)
    with pytest.raises(ValueError):
        lp_norm(f, 0.5)


@given(seed=st.integers(0, 2**32 - 1))
def test_transform_round_trip(seed):
    g = Grid((16, 8), (3.0, 2.0))
    a = np.random.default_rng(seed).standard_normal(g.shape)
    back = to_physical(to_spectral(Field(g, a))).data
    assert np.max(np.abs(back - a)) <= 1e-13 * np.max(np.abs(a))


def test_parseval(grid2, rng):
    a = rng.standard_normal(grid2.shape)
    ah = grid2.fft(a)
    lhs = np.sum(a * a)
    rhs = np.sum(grid2.parseval_weights * np.abs(ah) ** 2) / grid2.size
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_psi_profile():
    r = np.linspace(0, 3, 301)
    p = psi(r)
    assert np.all(p[r <= 1] == 1) and np.all(p[r >= 2] == 0)
    assert np.all(np.diff(p) <= 0)


def test_partition_of_unity():
    g = Grid.cube(2, 64, 64.0)
    total = sum(lp_multiplier(g, N, "band") for N in dyadic_range(g))
    lo, hi = 2 * math.pi / 64.0, min(g.nyquist) / 4
    sel = (g.kabs >= lo) & (g.kabs <= hi)
    assert np.max(np.abs(total[sel] - 1.0)) <= 1e-12


def test_lp_kinds_consistent(grid2):
    N = 1.0
    leq, band, gt = (lp_multiplier(grid2, N, k) for k in ("leq", "band", "gt"))
    assert np.allclose(lp_multiplier(grid2, N, "lt"), leq - band)
    assert np.allclose(lp_multiplier(grid2, N, "geq"), gt + band)
    assert np.allclose(leq + gt, 1.0)
    with pytest.raises(ValueError):
        lp_multiplier(grid2, N, "nope")
    with pytest.raises(ValueError):
        lp_multiplier(grid2, -1.0)


def test_lp_out_of_range_warns(grid2):
    with pytest.warns(LPRangeWarning):
        lp_multiplier(grid2, 1e4)


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(-2, 1))
def test_projector_self_adjoint(seed, k):
    g = Grid.cube(2, 32, 32.0)
    rng = np.random.default_rng(seed)
    f = Field(g, rng.standard_normal(g.shape))
    h = Field(g, rng.standard_normal(g.shape))
    N = 2.0 ** k
    a = g.inner(lp_project(f, N).data, h.data)
    b = g.inner(f.data, lp_project(h, N).data)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12 * lp_norm(f, 2) * lp_norm(h, 2))


@given(seed=st.integers(0, 2**32 - 1), s=st.floats(-2.0, 2.0), k=st.integers(-1, 1))
def test_projector_commutes_with_fractional_derivative(seed, s, k):
    g = Grid.cube(2, 16, 16.0)
    f = Field(g, np.random.default_rng(seed).standard_normal(g.shape))
    N = 2.0 ** k
    a = fractional_derivative(lp_project(f, N), s).data
    b = lp_project(fractional_derivative(f, s), N).data
    assert np.allclose(a, b, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(a))))


def test_sobolev_norm_of_single_mode():
    g = Grid.cube(2, 32, 2 * math.pi)
    f = Field.from_function(g, lambda x, y: np.cos(3 * x + 4 * y))
    for s in (0.5, 1.0, 1.5):
        assert sobolev_norm(f, s) == pytest.approx(5.0 ** s * lp_norm(f, 2), rel=1e-12)


def test_fractional_symbol_range(grid2):
    with pytest.raises(ValueError):
        fractional_symbol(grid2, 4.0)
    assert fractional_symbol(grid2, -1.0)[(0,) * 2] == 0.0


def test_apply_multiplier_rejects_infinite(grid2, rng):
    f = Field(grid2, rng.standard_normal(grid2.shape))
    with pytest.raises(ValueError), np.errstate(divide="ignore"):
        apply_multiplier(f, lambda *k: 1.0 / (k[0] * 0))


def test_apply_multiplier_keeps_representation(grid2, rng):
    f = Field(grid2, rng.standard_normal(grid2.shape))
    out = apply_multiplier(to_spectral(f), np.ones(grid2.spectral_shape))
    assert out.spectral
    assert np.allclose(out.physical().data, f.data)


def test_shift_whole_cells_is_roll(grid2, rng):
    a = rng.standard_normal(grid2.shape)
    out = grid2.shift(a, (2.0, -3.0))
    assert np.array_equal(out, np.roll(a, (2, -3), axis=(0, 1)))


def test_derivatives_of_trig_polynomial():
    g = Grid.cube(2, 32, 2 * math.pi)
    x, y = g.mesh
    f = np.sin(2 * x) * np.cos(3 * y)
    gx, gy = g.gradient(f)
    assert np.allclose(gx, 2 * np.cos(2 * x) * np.cos(3 * y), atol=1e-12)
    assert np.allclose(gy, -3 * np.sin(2 * x) * np.sin(3 * y), atol=1e-12)
    assert np.allclose(g.laplacian(f), -13 * f, atol=1e-11)
    H = g.hessian(f)
    assert np.allclose(H[0][1], -6 * np.cos(2 * x) * np.sin(3 * y), atol=1e-11)
