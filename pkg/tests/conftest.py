"""Shared pytest setup: import path for the test oracles and the
per-criterion acceptance report printed at the end of the run."""
import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

_DETAILS: dict[str, str] = {}
_OUTCOMES: dict[str, tuple[int, str, str]] = {}
_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


@pytest.fixture
def record(request):
    """Attach a one-line measurement summary to the running acceptance test."""

    def _record(text: str) -> None:
        _DETAILS[request.node.nodeid] = text

    return _record


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.outcome == "passed" else "FAIL"
        _OUTCOMES[report.nodeid] = (int(m.group(1)), m.group(2).replace("_", " "), status)


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (num, name, status) in sorted(_OUTCOMES.items(), key=lambda kv: kv[1][0]):
        detail = _DETAILS.get(nodeid, "")
        terminalreporter.write_line(f"{status} criterion {num}: {name}" + (f" | {detail}" if detail else ""))
