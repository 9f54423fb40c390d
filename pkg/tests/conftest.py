import numpy as np
import pytest

from lambdipole.dipole import make_params
from lambdipole.field import GridSpec, ScalarField


@pytest.fixture(scope="session")
def params2():
    """λ = 2, W = 1 dipole."""
    return make_params(2.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_grid():
    """64 x 32 oracle grid on [-8, 8] x (0, 8], h = 0.25."""
    return GridSpec(Lx=8.0, Ly=8.0, nx=64, ny=32)


def gaussian_blob(grid, center=(0.0, 4.0), sigma=0.8, amplitude=1.0):
    """Smooth nonnegative blob; negligible at the box edges for the grids used here."""
    X1, X2 = grid.mesh()
    data = amplitude * np.exp(-((X1 - center[0]) ** 2 + (X2 - center[1]) ** 2) / (2.0 * sigma ** 2))
    return ScalarField(grid, data)


@pytest.fixture
def blob(small_grid):
    return gaussian_blob(small_grid)


def random_blobs(grid, rng, n_bumps=3):
    """Nonnegative sum of Gaussian bumps kept away from the box edges."""
    X1, X2 = grid.mesh()
    data = np.zeros(grid.shape)
    for _ in range(n_bumps):
        c1 = rng.uniform(-0.4 * grid.Lx, 0.4 * grid.Lx)
        c2 = rng.uniform(0.4 * grid.Ly, 0.6 * grid.Ly)
        sigma = rng.uniform(0.5, 1.0)
        amp = rng.uniform(0.2, 2.0)
        data += amp * np.exp(-((X1 - c1) ** 2 + (X2 - c2) ** 2) / (2.0 * sigma ** 2))
    return ScalarField(grid, data)
