import numpy as np
import pytest

from upwindfilter.config import random_bv

ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, title: str, passed: bool, detail: str, seconds: float, budget: float):
    status = "PASS" if passed and seconds < budget else "FAIL"
    ACCEPTANCE_LINES[number] = (f"[{status}] criterion {number:2d} {title}: {detail} "
                                f"({seconds:.2f}s, budget {budget:g}s)")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def bv_state():
    """``bv_state(grid, seed, state_range=(-1, 1), tv=4.0)`` -> seeded piecewise-constant array."""

    def make(grid, seed, state_range=(-1.0, 1.0), tv=4.0, pieces=16):
        return random_bv(grid, seed, state_range, tv, pieces)

    return make
