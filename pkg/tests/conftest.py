import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# (m, n, multiplicities) covering bosonic, fermionic, mixed and multiplicity cases
SMALL_SPECS = [
    (2, 0, (1, 1)),
    (2, 0, (2, 1)),
    (1, 1, (1, 1)),
    (1, 1, (2, 1)),
    (1, 1, (1, 2)),
    (0, 2, (1, 2)),
    (2, 1, (1, 1, 1)),
]

Q = np.exp(-0.4 + 0.3j)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


_ACCEPTANCE_LINES = []


@pytest.fixture
def report_line():
    """Print a one-line verdict and keep it for the end-of-run summary."""

    def emit(line):
        print(line)
        _ACCEPTANCE_LINES.append(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
