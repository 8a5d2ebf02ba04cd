"""Shared pytest hooks: one summary line per acceptance criterion."""
import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        reason = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            reason = report.longrepr[2].removeprefix("Skipped: ")
        prev = _RESULTS.get(number)
        if prev is not None:
            # a criterion split across several tests fails if any part fails
            status = "FAIL" if "FAIL" in (prev[1], status) else ("SKIP" if "SKIP" in (prev[1], status) else status)
            reason = reason or prev[3]
        duration = report.duration + (prev[2] if prev else 0.0)
        _RESULTS[number] = (title, status, duration, reason)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status, duration, reason = _RESULTS[number]
        line = f"criterion {number}: {status:4s} {title} ({duration:.1f}s)"
        terminalreporter.write_line(line + (f" - {reason}" if reason else ""))
