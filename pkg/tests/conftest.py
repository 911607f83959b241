import pytest
from hypothesis import HealthCheck, settings

from paneitz_reduce.driver import build_config, make_problem

settings.register_profile("pkg", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pkg")


@pytest.fixture(scope="session")
def torus5_config():
    return build_config({"preset": "torus5"})


@pytest.fixture(scope="session")
def torus5(torus5_config):
    """Reduction problem of the torus n = 5 preset (b = h = 1, u0 = 1)."""
    return make_problem(torus5_config)


@pytest.fixture(scope="session")
def sphere9_config():
    return build_config({"preset": "sphere9"})


@pytest.fixture(scope="session")
def sphere9(sphere9_config):
    return make_problem(sphere9_config)
