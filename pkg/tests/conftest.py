import numpy as np
import pytest

from ulrrm.mcs import FittedRateModel, default_mcs_table


@pytest.fixture(scope="session")
def table():
    return default_mcs_table()


@pytest.fixture(scope="session")
def model():
    return FittedRateModel()


def random_channels(rng, shape):
    """Complex Gaussian entries with unit average power."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
