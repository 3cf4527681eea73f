import numpy as np
import pytest

from motionseed import _backend


@pytest.fixture(params=_backend.available())
def kernels(request):
    """Every importable kernel implementation, so both paths are exercised."""
    return _backend.get(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_stochastic(rng, n, m=None):
    m = n if m is None else m
    a = rng.random((n, m)) + 1e-3
    return a / a.sum(axis=1, keepdims=True)


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        passed = report.passed and not hasattr(report, "wasxfail")
        if report.when == "call" and hasattr(report, "wasxfail") and report.passed:
            passed = True  # xpass
        prev = _CRITERIA.get(number, (title, True))[1]
        _CRITERIA[number] = (title, prev and passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")
