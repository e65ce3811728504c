import numpy as np
import pytest

from voljump.config import ObservationSeries, TuningConfig
from voljump.paths import VolModel, SimulationSpec, simulate_path

ACCEPTANCE_LINES = []


@pytest.fixture
def small_cfg():
    return TuningConfig(bins=12, block_len=3, pilot_freqs=2, cutoff=5)


@pytest.fixture
def small_obs():
    # 12 bins of 40 samples, constant volatility and moderate noise
    spec = SimulationSpec(n=480, vol_model=VolModel("constant", sigma_sq=0.5), noise_std=0.01, seed=11)
    return simulate_path(spec).observed


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_series(values):
    return ObservationSeries(np.asarray(values, dtype=np.float64))
