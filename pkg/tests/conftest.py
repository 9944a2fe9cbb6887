import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from crlab import catalog

settings.register_profile(
    "crlab", deadline=None, max_examples=15,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("crlab")


@pytest.fixture(scope="session")
def t3_16():
    return catalog.t3_roto(1, 16).structure()


@pytest.fixture(scope="session")
def t3_32():
    return catalog.t3_roto(1, 32).structure()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
