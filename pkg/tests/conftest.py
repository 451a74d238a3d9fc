import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from sightline.safety import load_rules, load_taxonomy  # noqa: E402


@pytest.fixture(scope="session")
def rules():
    return load_rules()


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy()


_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    if report.when == "call" or report.outcome != "passed":
        if report.when == "call" or number not in _CRITERIA:
            _CRITERIA[number] = (report.outcome, name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        outcome, name = _CRITERIA[number]
        label = name[len("test_criterion_"):].split("_", 1)[1].replace("_", " ")
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'} {number}: {label}")
