import numpy as np
import pytest
from hypothesis import settings

from gldual.grid import GridSpec, build_grid
from gldual.model import ModelParams

settings.register_profile("ci", deadline=None, max_examples=40)
settings.load_profile("ci")


def make_params(grid, gamma=1.0, alpha=1.0, beta=1.0, K=10.0, eps=0.1, f=0.0, K12=10.0):
    fv = np.full(grid.N, float(f)) if np.isscalar(f) else np.asarray(f, dtype=float)
    return ModelParams(gamma, alpha, beta, K, eps, fv, K12)


@pytest.fixture
def g3():
    """Unit interval, three interior nodes, h = 0.25."""
    return build_grid(GridSpec(1, 1.0, 3))


@pytest.fixture
def g31():
    return build_grid(GridSpec(1, 1.0, 31))


@pytest.fixture
def r1(g3):
    return make_params(g3)


@pytest.fixture
def r2(g3):
    return make_params(g3, f=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
