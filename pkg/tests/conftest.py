import numpy as np
import pytest

from lqriss.plants import one_dim, random_plant


@pytest.fixture(scope="session")
def scalar():
    return one_dim()


@pytest.fixture(scope="session")
def plant42():
    return random_plant(4, 2, 7)


@pytest.fixture(scope="session")
def plant33():
    return random_plant(3, 3, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated in the terminal summary so it
# shows up even when output capture is on
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
