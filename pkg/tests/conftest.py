import numpy as np
import pytest

from qchlab.core import Grid1D, PhysParams

#: (criterion, description, passed, detail) rows filled by test_acceptance.
ACCEPTANCE_RESULTS = []


@pytest.fixture
def grid():
    return Grid1D(-10.0, 10.0, 512)


@pytest.fixture
def wide_grid():
    return Grid1D(-20.0, 20.0, 1024)


@pytest.fixture
def params():
    return PhysParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(
            f"criterion {num:>2} {'PASS' if passed else 'FAIL'}  {name}: {detail}")
