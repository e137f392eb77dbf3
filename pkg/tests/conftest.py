import numpy as np
import pytest

from ppmlink import LinkConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def op_config():
    """M=19, N=10, lambda=0.213 with default detector and ideal clocks."""
    return LinkConfig()


def binomial_sigma(p, n):
    return float(np.sqrt(p * (1 - p) / n))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
