import numpy as np
import pytest

from alpertlab import lebesgue_measure, make_grid, power_measure
from alpertlab.measure import cascade_measure


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)


@pytest.fixture
def grid1():
    return make_grid(1, 5)


@pytest.fixture
def grid2():
    return make_grid(2, 4)


@pytest.fixture
def leb1(grid1):
    return lebesgue_measure(grid1)


@pytest.fixture
def pow1(grid1):
    return power_measure(grid1, 1.0)


@pytest.fixture
def casc1(grid1):
    return cascade_measure(grid1, seed=77)
