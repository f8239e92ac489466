import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from beamscatter.grid import Grid
from beamscatter.linear import EnergyState

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def band_limited_state(grid: Grid, rng: np.random.Generator, frac: float = 0.25) -> EnergyState:
    """Random smooth state with spectrum inside ``frac * nyquist``."""
    mask = grid.kabs <= frac * min(grid.nyquist)
    u = grid.ifft(grid.fft(rng.standard_normal(grid.shape)) * mask)
    v = grid.ifft(grid.fft(rng.standard_normal(grid.shape)) * mask)
    return EnergyState(grid, u, v)


def gaussian_state(grid: Grid, sigma: float, amplitude: float = 1.0, center=None, v=None) -> EnergyState:
    c = [0.5 * s for s in grid.side] if center is None else center
    r = grid.distance(c)
    u = amplitude * np.exp(-(r * r) / (2 * sigma * sigma))
    return EnergyState(grid, u, np.zeros(grid.shape) if v is None else v)


@pytest.fixture
def grid2():
    return Grid.cube(2, 32, 32.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
