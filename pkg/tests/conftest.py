import numpy as np
import pytest

from clicktomo import heralded_split_state, uniform_grid


@pytest.fixture(scope="session")
def paper_grid_heralded():
    return uniform_grid(34, 0.015, 0.325)


@pytest.fixture(scope="session")
def paper_grid_multithermal():
    return uniform_grid(35, 0.05, 0.25)


@pytest.fixture(scope="session")
def small_grid():
    return uniform_grid(5, 0.1, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def balanced_state():
    return heralded_split_state(0.5, 3)
