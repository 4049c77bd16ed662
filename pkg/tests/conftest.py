"""Collects acceptance outcomes and prints one line per criterion."""

from collections import defaultdict

import pytest

_RESULTS = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _RESULTS[mark.args[0]].append((mark.args[1], item.name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        parts = _RESULTS[number]
        ok = all(p for _, _, p in parts)
        title = parts[0][0]
        failed = [name for _, name, p in parts if not p]
        detail = f" (failed: {', '.join(failed)})" if failed else ""
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}{detail}")
