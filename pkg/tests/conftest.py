import math

import numpy as np
import pytest

import specdecay as sd


@pytest.fixture(scope="session")
def gaussian2():
    return sd.make_gaussian_swirl(2)


@pytest.fixture(scope="session")
def v0():
    return sd.make_log_counterexample(2)


@pytest.fixture(scope="session")
def power_half():
    return sd.make_power_law(2, 0.5, 1.0)


@pytest.fixture(scope="session")
def small_grid():
    return sd.Grid(2, 2 * math.pi, 32)


@pytest.fixture(scope="session")
def random_field(small_grid):
    env = lambda r: np.where((r > 0) & (r <= 8.0), (r + 0.5) ** -2.0, 0.0)
    return sd.make_random_div_free(small_grid, 42, env)


def omega(n: int) -> float:
    return sd.sphere_area(n)


# ---------------------------------------------------------------------------
# acceptance summary: one pass/fail line per criterion at the end of the run
# ---------------------------------------------------------------------------

ACCEPTANCE_RESULTS = {}


def record_criterion(number, status, detail=""):
    ACCEPTANCE_RESULTS[number] = (status, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        status, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"ACCEPTANCE {n}: {status:8s} {detail}")
