import numpy as np
import pytest

from robin_bayes.mesh import build_rect_mesh

THETA0 = np.array([-0.6, 0.7, 2.0, 0.1, -0.08])


@pytest.fixture(scope="session")
def theta0():
    return THETA0.copy()


@pytest.fixture(scope="session")
def small_mesh():
    return build_rect_mesh(20, 4, 1.0, 0.2)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
