"""Per-criterion PASS/FAIL summary for the acceptance tests.

Tests tagged ``@pytest.mark.criterion(number, title)`` are grouped by number;
a criterion passes only if every test carrying its number passed.  A test
may attach a one-line note with ``record_property("detail", text)``.
"""

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _RESULTS.setdefault(number, {"title": title, "outcomes": [], "details": []})
    if report.when == "call":
        entry["details"] += [str(v) for k, v in report.user_properties if k == "detail"]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry["outcomes"].append("skipped" if report.skipped else ("passed" if report.passed else "failed"))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        outs = entry["outcomes"]
        if not outs or all(o == "skipped" for o in outs):
            status = "NOT RUN"
        elif all(o == "passed" for o in outs):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status:7s} {entry['title']}")
        for d in entry["details"]:
            terminalreporter.write_line(f"    {d}")
