import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from clonelab.phase_space import PhaseSpace, cylinder, euclidean, torus2

settings.register_profile("lab", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture
def r2():
    return PhaseSpace.of(euclidean(2))


@pytest.fixture
def cyl():
    return PhaseSpace.of(cylinder())


@pytest.fixture
def torus():
    return PhaseSpace.of(torus2())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
