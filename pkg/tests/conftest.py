import math
import sys

import pytest

from nodalq.lattice import RectangleSpec

A_QUARTIC = 2.0 ** 0.25


@pytest.fixture
def rect():
    return RectangleSpec(A_QUARTIC)


@pytest.fixture
def sqrt2_rect():
    return RectangleSpec(math.sqrt(2.0))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
