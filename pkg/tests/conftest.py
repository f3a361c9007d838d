import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from maxdde import preset

settings.register_profile("maxdde", derandomize=True, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "maxdde"))


@pytest.fixture(scope="session")
def ex2():
    return preset("ex2")


@pytest.fixture(scope="session")
def ex1():
    return preset("ex1")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    report = getattr(mod, "REPORT", None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(report):
        terminalreporter.write_line(report[key])
