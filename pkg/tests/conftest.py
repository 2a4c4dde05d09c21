import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))



def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): test belongs to acceptance criterion n")
    config._acceptance = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    outcomes = item.config._acceptance.setdefault(mark.args[0], [])
    if call.excinfo is not None and call.excinfo.errisinstance(pytest.skip.Exception):
        return
    # setup and teardown errors count against the criterion as well
    if call.when == "call" or call.excinfo is not None:
        outcomes.append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter, config):
    results = config._acceptance
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        outcomes = results[n]
        status = ("PASS" if all(outcomes) else "FAIL") if outcomes else "NOT RUN"
        terminalreporter.write_line(f"ACCEPTANCE {n:2d} ... {status}")
