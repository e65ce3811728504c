import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voljump.bootstrap import (
    BootstrapConfig,
    SmoothedVolPath,
    bootstrap_quantile,
    bootstrap_test,
    empirical_quantile,
    extended_trunc_blocks,
    generate_pseudo_path,
    moving_average,
    pseudo_statistics,
    smooth_spot_path,
)
from voljump.config import ParameterError, TuningConfig
from voljump.paths import preset, simulate_path
from voljump.spectral import estimate_spot_vol, noise_variance_hat


@pytest.fixture(scope="module")
def h0_path():
    return simulate_path(preset("h0-default", seed=8))


def test_config_validation():
    with pytest.raises(ParameterError):
        BootstrapConfig(replications=0)
    with pytest.raises(ParameterError):
        BootstrapConfig(level=0.0)
    with pytest.raises(ParameterError):
        BootstrapConfig(pseudo_shift=0)
    assert BootstrapConfig().shift_for(TuningConfig()) == 1
    assert BootstrapConfig(pseudo_shift=None).shift_for(TuningConfig()) == 15


@pytest.mark.parametrize("length", [1, 5, 30])
def test_moving_average_preserves_constants(length):
    np.testing.assert_allclose(moving_average(np.full(120, 0.7), length), 0.7, rtol=1e-14)


@pytest.mark.parametrize("length", [4, 5, 30])
def test_moving_average_preserves_affine(length):
    x = 0.3 + 0.01 * np.arange(120)
    np.testing.assert_allclose(moving_average(x, length), x, rtol=1e-12)


def test_moving_average_edges_interpolate():
    vals = np.array([10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0])
    out = moving_average(vals, 3)
    # first center is index 1 with mean 10/3; index 0 keeps the end value
    assert out[0] == 10.0 and out[-1] == 4.0
    assert out[1] == pytest.approx(10 / 3)


def test_moving_average_length_error():
    with pytest.raises(ParameterError):
        moving_average(np.ones(5), 6)


def test_extended_blocks_head():
    cfg = TuningConfig(bins=6, block_len=3, pilot_freqs=1, cutoff=1)
    per_bin = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    out = extended_trunc_blocks(per_bin, cfg)
    # threshold 6**0.25 = 1.565 keeps only the first bin
    np.testing.assert_allclose(out, [1.0, 0.5, 1 / 3, 0.0, 0.0, 0.0])
    # tau = 0.01 gives threshold 6**0.99 = 5.9, which drops only the last bin
    wide = TuningConfig(bins=6, block_len=3, pilot_freqs=1, cutoff=1, tau=0.01)
    np.testing.assert_allclose(extended_trunc_blocks(per_bin, wide), [1.0, 1.5, 2.0, 3.0, 4.0, 3.0])


def test_smoothed_path_shape_and_positivity(h0_path):
    cfg, bcfg = TuningConfig(), BootstrapConfig()
    sm = smooth_spot_path(h0_path.observed, cfg, bcfg)
    assert sm.per_bin.shape == (120,) and sm.per_sample.shape == (30000,)
    assert np.all(sm.per_sample > 0)
    np.testing.assert_array_equal(sm.per_sample.reshape(120, 250), np.repeat(sm.per_bin[:, None], 250, axis=1))


def test_smoothed_path_tracks_integrated_volatility():
    cfg, bcfg = TuningConfig(), BootstrapConfig()
    ratios = []
    for seed in range(10):
        path = simulate_path(preset("h0-default", seed=seed))
        sm = smooth_spot_path(path.observed, cfg, bcfg)
        ratios.append(sm.per_sample.mean() / path.vol_path[:-1].mean())
    assert abs(np.mean(ratios) - 1.0) < 0.10


def test_pseudo_path_trivial():
    sm = SmoothedVolPath(per_bin=np.zeros(4), per_sample=np.zeros(400))
    out = generate_pseudo_path(sm, 0.0, 4.2, np.random.default_rng(0))
    np.testing.assert_array_equal(out.values, 4.2)


def test_pseudo_path_noise_only():
    eta = 0.005
    sm = SmoothedVolPath(per_bin=np.zeros(120), per_sample=np.zeros(30000))
    out = generate_pseudo_path(sm, eta, 0.0, np.random.default_rng(1))
    assert out.values[0] == 0.0
    # sum of squared noise differences has variance about 6 eta^4 / n per unit
    se = math.sqrt(6.0 / 30000) * eta**2
    assert abs(noise_variance_hat(out) - eta**2) < 3 * se


def test_pseudo_path_deterministic():
    sm = SmoothedVolPath(per_bin=np.ones(3), per_sample=np.ones(300))
    a = generate_pseudo_path(sm, 0.01, 1.0, np.random.default_rng(5))
    b = generate_pseudo_path(sm, 0.01, 1.0, np.random.default_rng(5))
    assert np.array_equal(a.values, b.values)


def test_pseudo_path_variance():
    sm = SmoothedVolPath(per_bin=np.full(10, 0.5), per_sample=np.full(20000, 0.5))
    out = generate_pseudo_path(sm, 0.0, 0.0, np.random.default_rng(2))
    rv = np.sum(out.increments() ** 2)
    assert abs(rv - 0.5) < 4 * math.sqrt(2 / 20000) * 0.5


def test_empirical_quantile_convention():
    vals = np.arange(1.0, 11.0)
    assert empirical_quantile(vals, 0.1) == 9.0
    assert empirical_quantile(vals, 0.05) == 10.0
    assert empirical_quantile(vals, 0.5) == 5.0
    assert empirical_quantile([3.0], 0.1) == 3.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=50), st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_empirical_quantile_monotone(vals, a, b):
    lo, hi = min(a, b), max(a, b)
    assert empirical_quantile(vals, hi) <= empirical_quantile(vals, lo)


def test_single_replication_quantile(h0_path):
    cfg = TuningConfig()
    bcfg = BootstrapConfig(replications=1, seed=4)
    stats, _ = pseudo_statistics(estimate_spot_vol(h0_path.observed, cfg), cfg, bcfg, 30000)
    assert bootstrap_quantile(h0_path.observed, cfg, bcfg) == stats[0]


def test_bootstrap_determinism_and_workers(h0_path):
    cfg = TuningConfig()
    a = bootstrap_test(h0_path.observed, cfg, BootstrapConfig(replications=12, seed=9))
    b = bootstrap_test(h0_path.observed, cfg, BootstrapConfig(replications=12, seed=9))
    c = bootstrap_test(h0_path.observed, cfg, BootstrapConfig(replications=12, seed=9, workers=3))
    assert np.array_equal(a.pseudo_stats, b.pseudo_stats)
    assert np.array_equal(a.pseudo_stats, c.pseudo_stats)
    d = bootstrap_test(h0_path.observed, cfg, BootstrapConfig(replications=12, seed=10))
    assert not np.array_equal(a.pseudo_stats, d.pseudo_stats)


def test_multiple_shifts_share_paths(h0_path):
    cfg = TuningConfig()
    spot = estimate_spot_vol(h0_path.observed, cfg)
    both, _ = pseudo_statistics(spot, cfg, BootstrapConfig(replications=6), 30000, shifts=(1, 15))
    one, _ = pseudo_statistics(spot, cfg, BootstrapConfig(replications=6), 30000)
    ov, _ = pseudo_statistics(spot, cfg, BootstrapConfig(replications=6, pseudo_shift=None), 30000)
    np.testing.assert_array_equal(both[:, 0], one)
    np.testing.assert_array_equal(both[:, 1], ov)


def test_quantile_non_increasing_in_level(h0_path):
    res = bootstrap_test(h0_path.observed, TuningConfig(), BootstrapConfig(replications=40))
    qs = [res.quantile(lv) for lv in (0.01, 0.05, 0.1, 0.2, 0.5)]
    assert all(a >= b for a, b in zip(qs, qs[1:]))
    assert res.reject() == (res.statistic > res.quantile())


def test_reestimated_weights_variant(h0_path):
    res = bootstrap_test(h0_path.observed, TuningConfig(), BootstrapConfig(replications=5, reuse_weights=False))
    assert res.pseudo_stats.shape == (5,) and np.all(np.isfinite(res.pseudo_stats))


def test_truncation_never_fires_on_pseudo_paths(h0_path, caplog):
    res = bootstrap_test(h0_path.observed, TuningConfig(), BootstrapConfig(replications=500))
    if res.truncation_fires:
        # reported rather than failed: the count is logged by the bootstrap
        assert "truncation fired" in caplog.text
    assert res.truncation_fires == 0


def test_filter_longer_than_bins(h0_path):
    with pytest.raises(ParameterError):
        smooth_spot_path(h0_path.observed, TuningConfig(), BootstrapConfig(filter_len=121))
