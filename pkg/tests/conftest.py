import math
import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=200, deadline=None)
settings.register_profile("dev", max_examples=50, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "dev"))


def within_sigmas(count: int, n: int, p: float, k: float = 4.0) -> bool:
    """Binomial count within ``k`` standard deviations of ``n*p``."""
    return abs(count - n * p) <= k * math.sqrt(n * p * (1 - p))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance reporting -------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    number, title = marker.args
    status = "PASS" if rep.passed else "FAIL"
    previous = _CRITERIA.get(number)
    if previous is None or previous[0] == "PASS":
        _CRITERIA[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title = _CRITERIA[number]
        terminalreporter.write_line(f"[{status}] {number:2d}. {title}")
