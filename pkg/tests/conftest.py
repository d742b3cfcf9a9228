import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from livsic.fixtures import cat_map, conformal_fixture, diagonal_fixture

settings.register_profile("lab", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def cat():
    return cat_map()


@pytest.fixture(scope="session")
def diag4():
    return diagonal_fixture()


@pytest.fixture(scope="session")
def conf4():
    return conformal_fixture()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
