import re

import pytest

from idid.domains import builtin

_criteria: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    n, name = int(m.group(1)), m.group(2).replace("_", " ")
    if report.when == "call" or report.outcome != "passed":
        prev = _criteria.get(n, (name, "PASS"))[1]
        status = "PASS" if report.outcome == "passed" and prev == "PASS" else "FAIL"
        _criteria[n] = (name, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        name, status = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {name}")


@pytest.fixture(scope="session")
def tiger():
    return builtin("tiger")


@pytest.fixture(scope="session")
def mm():
    return builtin("mm")

