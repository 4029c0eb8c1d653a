import numpy as np
import pytest

from sectorbf.designer import DesignConfig, design_bank
from sectorbf.geometry import circular_array, paper_sectors

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def paper_bank_8():
    """8-mic, r = 0.1 m, paper sectors, 1 degree grid, n_fft 512 at 16 kHz."""
    return design_bank(circular_array(8, 0.1), paper_sectors(), DesignConfig())


@pytest.fixture(scope="session")
def paper_bank_4():
    return design_bank(circular_array(4, 0.1), paper_sectors(), DesignConfig())


@pytest.fixture(scope="session")
def coarse_bank_8():
    return design_bank(circular_array(8, 0.1), paper_sectors(), DesignConfig(angle_step_deg=5.0))
