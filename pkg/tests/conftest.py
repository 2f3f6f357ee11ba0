"""Shared pytest hooks.

Tests marked ``@pytest.mark.criterion(n, title)`` are reported in a summary
section with one PASS/FAIL line each.  A test can add measured values to its
line through the ``criterion_detail`` fixture.
"""

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): an acceptance criterion")


@pytest.fixture
def criterion_detail(request):
    parts = []
    request.node.criterion_parts = parts
    return parts.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    rep = outcome.get_result()
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        verdict = "PASS" if rep.passed else "FAIL"
        detail = "; ".join(getattr(item, "criterion_parts", []))
        _RESULTS[number] = f"criterion {number} ({title}): {verdict}" + (f" [{detail}]" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        terminalreporter.write_line(_RESULTS[number])
