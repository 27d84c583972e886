import numpy as np
import pytest

from occupancy import SuffStats

ACCEPTANCE_LINES = []


@pytest.fixture
def frog():
    # 27 sites, 4 visits, 12 never detected, 47 detections; b = 36 is the only
    # integer with (y - O) / b rounding to the published 0.889
    return SuffStats(S=27, tau=4, f0=12, y=47, b=36)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
