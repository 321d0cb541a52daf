"""Collects the outcome of every acceptance criterion and prints one line each."""

import re

_CRITERION = re.compile(r"test_criterion_(\d+)")
_results: dict = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _results[num] = (report.nodeid, report.outcome)


_labels: dict = {}


def pytest_itemcollected(item):
    m = _CRITERION.search(item.nodeid)
    if m and getattr(item, "obj", None) is not None and item.obj.__doc__:
        _labels[int(m.group(1))] = item.obj.__doc__.strip().splitlines()[0]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        _, outcome = _results[num]
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark}  {num:2d}. {_labels.get(num, '')}")
    passed = sum(1 for _, o in _results.values() if o == "passed")
    terminalreporter.write_line(f"{passed}/{len(_results)} criteria pass")
