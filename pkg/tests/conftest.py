import math

import pytest

from siloss.budget import Participation, QBudget
from siloss.ringdown import CouplingCalibration

OMEGA = 2.0 * math.pi * 2.6e9


@pytest.fixture
def cal():
    return CouplingCalibration(kappa=822.0, q2=6.5e11)


@pytest.fixture
def budget():
    return QBudget(q0=3.0e9, q1=5.8e9, q2=6.5e11)


@pytest.fixture
def part():
    return Participation()


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
