import numpy as np
import pytest

from qdslab.grids import SpatialGrid


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def grid128():
    return SpatialGrid(dim=1, points=128, extent=8.0)


@pytest.fixture
def grid256():
    return SpatialGrid(dim=1, points=256, extent=8.0)
