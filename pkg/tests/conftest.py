import numpy as np
import pytest


def bell_state() -> np.ndarray:
    v = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return np.outer(v, v.conj())


@pytest.fixture
def bell():
    return bell_state()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# acceptance lines, one per criterion, printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
