import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from voljump.changepoint import diamond_stat, diamond_values, estimate_changepoint, locate
from voljump.config import ParameterError, TuningConfig


def _cfg(bins, a):
    return TuningConfig(bins=bins, block_len=a, pilot_freqs=1, cutoff=1)


def test_diamond_stat_definition():
    cfg = _cfg(8, 2)
    per_bin = np.array([1.0, 1.0, 3.0, 3.0, 3.0, 5.0, 5.0, 5.0])
    # i = 2: |(1 + 1) - (3 + 3)| / sqrt 2
    assert diamond_stat(per_bin, 2, cfg) == pytest.approx(4 / math.sqrt(2))
    with pytest.raises(ParameterError):
        diamond_stat(per_bin, 1, cfg)
    with pytest.raises(ParameterError):
        diamond_stat(per_bin, 7, cfg)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(5, 12), elements=st.floats(-3, 3)), st.integers(1, 2))
def test_diamond_values_brute_force(per_bin, a):
    cfg = _cfg(len(per_bin), a)
    np.testing.assert_allclose(diamond_values(per_bin, cfg), oracles.diamond(per_bin, a), rtol=1e-12, atol=1e-12)
    for i in range(a, len(per_bin) - a + 1):
        assert diamond_stat(per_bin, i, cfg) == pytest.approx(oracles.diamond(per_bin, a)[i - a], abs=1e-12)


@pytest.mark.parametrize("step_at", [20, 37, 60])
@pytest.mark.parametrize("delta", [0.3, -0.5])
def test_tent_shape_on_step(step_at, delta):
    # a step after bin step_at gives values rising linearly up to step_at and falling after it
    cfg = _cfg(80, 10)
    per_bin = np.where(np.arange(1, 81) > step_at, 1.0 + delta, 1.0)
    vals = diamond_values(per_bin, cfg)
    i = np.arange(10, 71)
    peak = int(np.argmax(vals)) + 10
    assert peak == step_at
    left = vals[(i >= step_at - 10) & (i <= step_at)]
    right = vals[(i >= step_at) & (i <= step_at + 10)]
    assert np.all(np.diff(left) > 0) and np.all(np.diff(right) < 0)
    assert vals.max() == pytest.approx(abs(delta) * math.sqrt(10))


def test_locate_on_step_and_rate():
    cfg = TuningConfig()
    per_bin = np.where(np.arange(1, 121) > 80, 0.84, 0.64)
    est = locate(per_bin, cfg, delta=0.2, n=30000)
    assert est.argmax_bin == 80
    assert est.theta_hat == pytest.approx(2 / 3)
    assert est.rate_bound == pytest.approx(cfg.h / 0.2 * math.sqrt(15 * math.log(30000)))
    assert locate(per_bin, cfg).rate_bound is None


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 30, elements=st.floats(0.1, 3.0)), st.floats(0.01, 100.0))
def test_argmax_scale_invariance(per_bin, lam):
    cfg = _cfg(30, 5)
    vals = diamond_values(per_bin, cfg)
    top = vals.max()
    # skip near ties, where rounding can legitimately move the argmax
    if np.sum(vals >= top * (1 - 1e-9)) == 1:
        assert locate(lam * per_bin, cfg).argmax_bin == locate(per_bin, cfg).argmax_bin


def test_window_too_large():
    with pytest.raises(ParameterError):
        diamond_values(np.ones(10), _cfg(10, 5))


def test_estimate_changepoint_on_simulated_jump():
    from voljump.paths import preset, simulate_path

    path = simulate_path(preset("h1-clean", delta=1.0, seed=3))
    est = estimate_changepoint(path.observed, TuningConfig())
    assert abs(est.theta_hat - 2 / 3) <= 0.05
