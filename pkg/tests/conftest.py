import numpy as np
import pytest

from lgcorr.qcore import SpinModel

ACCEPTANCE_LINES: list[str] = []


def expm_taylor(a: np.ndarray, terms: int = 40) -> np.ndarray:
    """Scaling-and-squaring Taylor exponential; independent of the eigh path under test."""
    norm = np.abs(a).sum(axis=1).max()
    k = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0 else 0
    b = a / 2**k
    out = np.eye(len(a), dtype=complex)
    term = np.eye(len(a), dtype=complex)
    for n in range(1, terms):
        term = term @ b / n
        out = out + term
    for _ in range(k):
        out = out @ out
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spin():
    return SpinModel(omega=1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
