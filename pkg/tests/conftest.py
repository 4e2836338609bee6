import numpy as np
import pytest

from gaugesmooth.fixtures import abelian_rough, su2_small


@pytest.fixture(scope="session")
def su2_problem():
    return su2_small(seed=7)


@pytest.fixture(scope="session")
def abelian_problem():
    return abelian_rough(seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
