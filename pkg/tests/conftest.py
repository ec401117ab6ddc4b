"""Collects acceptance-gate results and prints them at the end of the run."""

import pytest

GATE_RESULTS = []


@pytest.fixture
def gate(capsys):
    """Record ``(criterion, passed, detail)`` and echo one PASS/FAIL line immediately."""

    def record(criterion, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
        GATE_RESULTS.append(line)
        with capsys.disabled():
            print("\n" + line, end="")
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if GATE_RESULTS:
        terminalreporter.section("acceptance gate")
        for line in GATE_RESULTS:
            terminalreporter.write_line(line)
