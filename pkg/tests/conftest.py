import numpy as np
import pytest

from gpe2.grid import Grid2D
from gpe2.oracles import dipole_pair, ground_state


@pytest.fixture(scope="session")
def std_grid():
    return Grid2D(8.0, 257, 1.0)


@pytest.fixture(scope="session")
def small_grid():
    return Grid2D(6.0, 65, 1.0)


@pytest.fixture(scope="session")
def phi0(std_grid):
    return ground_state(std_grid)


@pytest.fixture(scope="session")
def wpair(std_grid):
    return dipole_pair(std_grid, (1.0, 0.0))


def random_dirichlet(grid, rng, scale=1.0):
    """Smooth-ish random field with a zero boundary ring."""
    vals = scale * rng.standard_normal(grid.shape) * np.exp(-0.25 * grid.omega * grid.radius_squared)
    return grid.field(vals)
