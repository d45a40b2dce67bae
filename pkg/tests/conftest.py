import numpy as np
import pytest

from stepcert.instances import ProblemInstance


def scalar_instance(q=1.0, z0=1.0, nu=0.1, Z=None):
    """1-D instance ``f(z) = q z^2 / 2`` starting at ``z0``."""
    return ProblemInstance.from_matrix(np.array([[q]]), np.array([z0]), nu, Z if Z is not None else abs(z0))


@pytest.fixture
def unit_instance():
    return scalar_instance()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
