import numpy as np
import pytest

from platesim.spectral import BoxDomain, build_basis

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def unit_interval():
    return build_basis(BoxDomain((1.0,)), 16)


@pytest.fixture
def unit_square():
    return build_basis(BoxDomain((1.0, 1.0)), (8, 6))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
