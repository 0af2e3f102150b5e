import numpy as np
import pytest

from narrowband.curves import Curve
from narrowband.symbols import FrequencyGrid


@pytest.fixture(scope="session")
def circle():
    return Curve.circle((0.0, 1.0), 1.0)


@pytest.fixture(scope="session")
def grid():
    return FrequencyGrid(2.0, 1024)


@pytest.fixture(scope="session")
def small_grid():
    return FrequencyGrid(2.0, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
