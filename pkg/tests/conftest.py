import numpy as np
import pytest

from tblab.grid import Cube, cube1, make_grid


@pytest.fixture(scope="session")
def unit_grid():
    # box [-2, 2], 512 cells: 128 points per unit length, fine enough to certify
    return make_grid(1, cube1(0.0, 4.0), 512)


@pytest.fixture(scope="session")
def grid2d():
    return make_grid(2, Cube((0.0, 0.0), 4.0), 256)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
