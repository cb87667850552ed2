import numpy as np
import pytest

from ctxent.minimizer import MinimizerConfig
from ctxent.reconstruct import ReconstructionConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def fast_recon():
    """Fewer restarts than the default 8n; every tested state still converges."""
    return ReconstructionConfig(minimizer=MinimizerConfig(restarts=4))


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
