import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gstateprep.target import spec_from_mapping

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")


BASE = {"lambda": 0.8, "nu": 0.1, "epsilon_prime": "1/10"}


def make_spec(**kw):
    """Scenario mapping with the shared slack defaults filled in."""
    data = {**BASE, **kw}
    return spec_from_mapping(data)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def uniform64():
    return make_spec(name="uniform64", N=64, family="uniform", eta=1.0)
