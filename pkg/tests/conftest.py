import random

import pytest

from byzstab import builtin_metric

BUILTINS = ("SP", "F", "R", "NC", "BFS", "MET")

_criteria: dict[int, dict] = {}
_node_criterion: dict[str, int] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion a test belongs to")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    n = _node_criterion.get(report.nodeid)
    if n is not None:
        _criteria[n]["outcomes"].append(report.outcome)


def pytest_collection_finish(session):
    for item in session.items:
        mark = item.get_closest_marker("criterion")
        if mark:
            n, title = mark.args
            _node_criterion[item.nodeid] = n
            _criteria.setdefault(n, {"title": title, "outcomes": []})


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        entry = _criteria[n]
        outcomes = entry["outcomes"]
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {status:7s} {entry['title']} ({len(outcomes)} checks)")


def metric_for(name: str):
    return builtin_metric(name, 10 if name == "F" else None)


@pytest.fixture(params=BUILTINS)
def builtin(request):
    return metric_for(request.param)


@pytest.fixture
def rng():
    return random.Random(12345)
