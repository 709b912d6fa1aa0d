import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from symred.builtins import builtin_config
from symred.model import load_model

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def models():
    """Loaded builtin models, shared so cached generators/strata are computed once."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_model(builtin_config(name))
        return cache[name]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
