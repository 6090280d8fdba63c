import numpy as np
import pytest

from flocbal.fluid import FluidField

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def calm():
    return FluidField(T=10.0, k=0.01, eps=1e-2, pH=7.0, O=1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
