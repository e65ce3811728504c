import warnings

import numpy as np
import pytest

from voljump.config import (
    BlockLengthWarning,
    FormatError,
    ObservationSeries,
    ParameterError,
    TuningConfig,
    choose_bins,
)


def test_series_basic():
    obs = ObservationSeries([1.0, 2.0, 4.0])
    assert obs.n == 2
    assert len(obs) == 3
    np.testing.assert_array_equal(obs.increments(), [1.0, 2.0])


def test_series_is_read_only():
    obs = ObservationSeries(np.zeros(5))
    with pytest.raises(ValueError):
        obs.values[0] = 1.0


@pytest.mark.parametrize("bad", [[1.0], [], [[1.0, 2.0]]])
def test_series_rejects_short_or_2d(bad):
    with pytest.raises(FormatError):
        ObservationSeries(bad)


def test_series_reports_first_nonfinite_index():
    with pytest.raises(FormatError, match="index 2"):
        ObservationSeries([0.0, 1.0, np.nan, np.inf])


def test_defaults():
    cfg = TuningConfig()
    assert (cfg.bins, cfg.block_len, cfg.tau, cfg.pilot_freqs, cfg.cutoff) == (120, 15, 0.75, 20, 50)
    assert cfg.m_n == 8
    assert cfg.threshold == pytest.approx(120**0.25)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(bins=0),
        dict(block_len=200),
        dict(tau=1.0),
        dict(tau=0.0),
        dict(regularity=0.0),
        dict(regularity=1.5),
        dict(pilot_freqs=60),
        dict(noise_variance=-1.0),
        dict(oracle_scale=True),
        dict(pilot_floor=0.0),
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ParameterError):
        TuningConfig(**kwargs)


def test_validate_alignment_and_cutoff():
    cfg = TuningConfig()
    with pytest.raises(ParameterError, match="multiple"):
        cfg.validate(30001)
    with pytest.raises(ParameterError, match="cutoff"):
        TuningConfig(bins=120, cutoff=50).validate(120 * 40)


def test_validate_warns_on_long_blocks():
    with pytest.warns(BlockLengthWarning):
        TuningConfig().validate(30000)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        TuningConfig(bins=120, block_len=1, regularity=1.0).validate(30000)


def test_choose_bins():
    # sqrt(30000)/log(30000) = 16.9; 15 and 16 divide 30000, 16 is closer
    assert choose_bins(30000) == 16
    assert 1000 % choose_bins(1000) == 0
    with pytest.raises(ParameterError):
        choose_bins(2)
