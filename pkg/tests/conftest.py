import numpy as np
import pytest

from helicity_lab.lattice import TorusGrid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid8():
    return TorusGrid(8, 2 * np.pi)


@pytest.fixture
def grid12():
    return TorusGrid(12, 5.0)


@pytest.fixture
def grid16():
    return TorusGrid(16, 2 * np.pi)
