import numpy as np
import pytest

from critnorm.fields import Grid

# default box: fundamental wavenumber 1/sqrt(2), so the planar vortex pair
# sits at |xi|^2 = 1 and the mode (2,2,0) realizes |xi|^2 = 4 exactly
DEFAULT_L = 2.0 * np.pi * np.sqrt(2.0)


@pytest.fixture(scope="session")
def grid16():
    return Grid(16, DEFAULT_L)


@pytest.fixture(scope="session")
def grid32():
    return Grid(32, DEFAULT_L)


@pytest.fixture(scope="session")
def grid64():
    return Grid(64, DEFAULT_L)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260815)
