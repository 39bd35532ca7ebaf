import numpy as np
import pytest

from ttreg.decomp import random_tt, reconstruct


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running Monte-Carlo check")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    results = item.config._criteria
    if report.when == "setup" and report.skipped:
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        results[number] = ("SKIP", title, reason.removeprefix("Skipped: "))
    elif report.when == "call":
        if report.skipped:
            reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else ""
            results[number] = ("SKIP", title, reason.removeprefix("Skipped: "))
        else:
            results[number] = ("PASS" if report.passed else "FAIL", title, detail)
    elif report.failed:
        results[number] = ("FAIL", title, f"{report.when} error")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        status, title, detail = results[number]
        line = f"{status} criterion {number}: {title}"
        terminalreporter.write_line(f"{line} [{detail}]" if detail else line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tt_tensor(rng):
    """Factory for dense tensors with exact TT ranks."""

    def make(shape, ranks, anchor=None):
        return reconstruct(random_tt(shape, ranks, rng, anchor=anchor))

    return make
