import numpy as np
import pytest

from broxsim import GridSpec, build_scale, deterministic_env, generate_two_sided_bm


@pytest.fixture(scope="session")
def grid():
    return GridSpec(x_min=-5.0, x_max=5.0, h=0.01)


@pytest.fixture(scope="session")
def flat_env(grid):
    return deterministic_env(grid, "flat")


@pytest.fixture(scope="session")
def flat_sm(flat_env):
    return build_scale(flat_env)


@pytest.fixture(scope="session")
def linear_env(grid):
    return deterministic_env(grid, "linear", slope=-1.0)


@pytest.fixture(scope="session")
def linear_sm(linear_env):
    return build_scale(linear_env)


@pytest.fixture(scope="session")
def bm_env():
    return generate_two_sided_bm(GridSpec(-3.0, 3.0, 0.01), seed=42)


@pytest.fixture(scope="session")
def bm_sm(bm_env):
    return build_scale(bm_env)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
