import numpy as np
import pytest

from entropy_lab import sphere


@pytest.fixture(scope="session")
def grid():
    return sphere.default_grid(32)


@pytest.fixture(scope="session")
def small_grid():
    return sphere.default_grid(16)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def random_zonal(rng, grid, lo, hi, amplitude=None):
    """Random zonal field with modes ``lo..hi``; rescaled to ``max|u| = amplitude``."""
    c = np.zeros(grid.l_max + 1)
    c[lo:hi + 1] = rng.normal(size=hi - lo + 1)
    u = grid.basis @ c
    if amplitude is not None:
        u *= amplitude / np.max(np.abs(u))
    return u
