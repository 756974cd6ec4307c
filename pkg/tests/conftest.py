import numpy as np
import pytest

from hypdisp.specfun import GeometryParams
from hypdisp.transform import make_plan


@pytest.fixture(scope="session")
def h3():
    return GeometryParams(3)


@pytest.fixture(scope="session")
def plan3(h3):
    """Moderate plan used by the transform and group tests."""
    return make_plan(h3, r_max=12.0, n_r=512, lam_max=24.0, n_lam=512)


@pytest.fixture(scope="session")
def small_plan3(h3):
    """Cheap plan for solver tests."""
    return make_plan(h3, r_max=20.0, n_r=256, lam_max=8.0, n_lam=512)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("]")[0].lstrip("["))):
            terminalreporter.write_line(line)
