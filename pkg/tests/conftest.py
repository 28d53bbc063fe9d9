import numpy as np
import pytest

from fastdiff import DiffusionModel
from fastdiff.domains import RadialDomain


@pytest.fixture(scope="session")
def plap():
    return DiffusionModel.plaplace(1.5)


@pytest.fixture(scope="session")
def pme():
    return DiffusionModel.porous_medium(0.5)


@pytest.fixture(scope="session")
def exterior():
    return RadialDomain.exterior_ball(1.0, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
