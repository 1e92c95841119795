import pytest
from hypothesis import HealthCheck, settings

from oracles import UNIT2, UNIT3

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit2():
    return UNIT2


@pytest.fixture
def unit3():
    return UNIT3


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
