import numpy as np
import pytest
from hypothesis import settings

from twinbeam.modes import GridSpec, hermite_gauss_mode

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")

W0 = 1e-3


@pytest.fixture(scope="session")
def grid():
    return GridSpec.default(W0)


@pytest.fixture(scope="session")
def coarse_grid():
    return GridSpec(64, 64, 8 * W0, 8 * W0)


@pytest.fixture(scope="session")
def hg(grid):
    cache = {}

    def get(p, q):
        if (p, q) not in cache:
            cache[p, q] = hermite_gauss_mode(p, q, W0, grid)
        return cache[p, q]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
