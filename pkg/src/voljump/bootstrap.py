"""Bootstrap calibration of the overlapping truncated statistic.

A smoothed, bin-wise constant volatility path is fitted to the data.  Pseudo
paths without jumps are then drawn from it (plus Gaussian noise of the
estimated size), and the quantile of the pseudo maximum statistics replaces
the Gumbel quantile in the rejection rule.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .config import ObservationSeries, ParameterError, TuningConfig
from .spectral import SpotVolSeries, block_averages, estimate_spot_vol, spectral_grid
from .testing import RuleKind, compute_statistic, scale_eta

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings of the bootstrap.

    Parameters
    ----------
    replications : int
        Number ``N`` of pseudo paths.
    filter_len : int
        Length of the equal-weight moving-average filter.
    seed : int or tuple of int
        Root seed; replicate ``r`` uses the ``r``-th spawned stream.
    level : float
        Test level ``alpha``.
    pseudo_shift : int or None
        Index shift of the pseudo statistic.  ``1`` compares consecutive
        windows; ``None`` uses ``block_len``, the shift of the calibrated
        statistic.
    reuse_weights : bool
        Use the original weights and noise estimate on the pseudo paths
        instead of re-estimating them.
    workers : int
        Worker processes; results do not depend on it.
    floor : float
        Lower clamp of the smoothed volatility.
    """

    replications: int = 500
    filter_len: int = 30
    seed: int | tuple[int, ...] = 0
    level: float = 0.1
    pseudo_shift: int | None = 1
    reuse_weights: bool = True
    workers: int = 1
    floor: float = 1e-8

    def __post_init__(self):
        if self.replications < 1:
            raise ParameterError("replications must be positive")
        if self.filter_len < 1:
            raise ParameterError("filter_len must be positive")
        if not 0.0 < self.level < 1.0:
            raise ParameterError(f"level must lie in (0, 1), got {self.level}")
        if self.pseudo_shift is not None and self.pseudo_shift < 1:
            raise ParameterError("pseudo_shift must be positive")
        if self.workers < 1:
            raise ParameterError("workers must be positive")
        if self.floor <= 0:
            raise ParameterError("floor must be positive")

    def shift_for(self, cfg: TuningConfig) -> int:
        return cfg.block_len if self.pseudo_shift is None else self.pseudo_shift

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SmoothedVolPath:
    per_bin: np.ndarray
    per_sample: np.ndarray


def extended_trunc_blocks(per_bin, cfg: TuningConfig) -> np.ndarray:
    """Truncated backward block means for every bin ``i = 1 .. bins``.

    For ``i >= block_len`` these are the usual truncated block means; before
    that the mean runs over the ``i`` bins available.
    """
    per_bin = np.asarray(per_bin, dtype=np.float64)
    a = cfg.block_len
    kept = np.where(np.abs(per_bin) <= cfg.threshold, per_bin, 0.0)
    head = np.cumsum(kept[: a - 1]) / np.arange(1, a)
    full = block_averages(per_bin, cfg).trunc
    return np.concatenate((head, full))


def moving_average(values, length: int) -> np.ndarray:
    """Equal-weight filter with linear interpolation to the end values.

    The mean of each full window is placed at the window center; positions
    outside the first and last center are interpolated linearly towards
    ``values[0]`` and ``values[-1]``.
    """
    values = np.asarray(values, dtype=np.float64)
    size = values.shape[0]
    if not 1 <= length <= size:
        raise ParameterError(f"filter length {length} outside 1..{size}")
    means = np.lib.stride_tricks.sliding_window_view(values, length).mean(axis=1)
    centers = np.arange(means.shape[0]) + (length - 1) / 2.0
    xp, fp = [centers], [means]
    if centers[0] > 0:
        xp.insert(0, [0.0])
        fp.insert(0, values[:1])
    if centers[-1] < size - 1:
        xp.append([size - 1.0])
        fp.append(values[-1:])
    return np.interp(np.arange(size, dtype=np.float64), np.concatenate(xp), np.concatenate(fp))


def smooth_from_spot(spot: SpotVolSeries, cfg: TuningConfig, bcfg: BootstrapConfig, n: int) -> SmoothedVolPath:
    if bcfg.filter_len > cfg.bins:
        raise ParameterError(f"filter_len={bcfg.filter_len} exceeds bins={cfg.bins}")
    smooth = moving_average(extended_trunc_blocks(spot.per_bin, cfg), bcfg.filter_len)
    smooth = np.maximum(smooth, bcfg.floor)
    return SmoothedVolPath(per_bin=smooth, per_sample=np.repeat(smooth, n // cfg.bins))


def smooth_spot_path(obs: ObservationSeries, cfg: TuningConfig, bcfg: BootstrapConfig) -> SmoothedVolPath:
    """Smoothed bin-wise constant volatility path fitted to ``obs``."""
    cfg.validate(obs.n)
    return smooth_from_spot(estimate_spot_vol(obs, cfg), cfg, bcfg, obs.n)


def _pseudo_increments(per_sample: np.ndarray, eta_hat: float, rng: np.random.Generator) -> np.ndarray:
    n = per_sample.shape[0]
    z = rng.standard_normal(n)
    e = rng.standard_normal(n)
    noise = eta_hat * e
    noise[1:] -= noise[:-1]
    return np.sqrt(per_sample / n) * z + noise


def generate_pseudo_path(
    smoothed: SmoothedVolPath, eta_hat: float, y0: float, rng: np.random.Generator
) -> ObservationSeries:
    """Pseudo observations ``X*_i + eta_hat E_i`` with ``X*_0 = Y*_0 = y0``."""
    if eta_hat < 0:
        raise ParameterError("eta_hat must be nonnegative")
    inc = _pseudo_increments(np.asarray(smoothed.per_sample, dtype=np.float64), eta_hat, rng)
    return ObservationSeries(np.concatenate(([y0], y0 + np.cumsum(inc))))


@dataclass(frozen=True)
class _Job:
    cfg: TuningConfig
    bcfg: BootstrapConfig
    per_sample: np.ndarray
    eta_hat: float
    weights: np.ndarray
    eta_sq: float
    stat_eta: float
    shifts: tuple[int, ...]


def _pseudo_stat(job: _Job, rng: np.random.Generator) -> tuple[list[float], int]:
    cfg, bcfg = job.cfg, job.bcfg
    n = job.per_sample.shape[0]
    inc = _pseudo_increments(job.per_sample, job.eta_hat, rng)
    if bcfg.reuse_weights:
        grid = spectral_grid(n, cfg.bins, cfg.cutoff)
        s = grid.coefficients(inc)
        per_bin = _kernels.weighted_spot(s * s, grid.bias(job.eta_sq), job.weights)
        eta_scale = job.stat_eta
    else:
        obs = ObservationSeries(np.concatenate(([0.0], np.cumsum(inc))))
        spot = estimate_spot_vol(obs, cfg)
        per_bin = spot.per_bin
        eta_scale = scale_eta(spot, cfg)
    fired = int(np.count_nonzero(np.abs(per_bin) > cfg.threshold))
    trunc = _kernels.window_means(per_bin, cfg.block_len, cfg.threshold)
    scale = math.sqrt(8.0 * eta_scale)
    return [float(_kernels.max_ratio(trunc, sh, scale)[0]) for sh in job.shifts], fired


def _run_chunk(job: _Job, seeds) -> list[tuple[list[float], int]]:
    return [_pseudo_stat(job, np.random.default_rng(s)) for s in seeds]


def empirical_quantile(values, level: float) -> float:
    """Upper order statistic at position ``ceil((1 - level) N)`` (1-based)."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    count = values.shape[0]
    if count == 0:
        raise ParameterError("no values")
    pos = math.ceil(round((1.0 - level) * count, 9))
    return float(values[min(max(pos, 1), count) - 1])


@dataclass(frozen=True)
class BootstrapResult:
    """Pseudo statistics and the resulting decision for one series."""

    statistic: float
    pseudo_stats: np.ndarray
    level: float
    truncation_fires: int
    eta_hat: float

    def quantile(self, level: float | None = None) -> float:
        return empirical_quantile(self.pseudo_stats, self.level if level is None else level)

    def reject(self, level: float | None = None) -> bool:
        return bool(self.statistic > self.quantile(level))

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "quantile": self.quantile(),
            "reject": self.reject(),
            "level": self.level,
            "replications": int(self.pseudo_stats.shape[0]),
            "truncation_fires": self.truncation_fires,
            "eta_hat": self.eta_hat,
        }


def pseudo_statistics(
    spot: SpotVolSeries, cfg: TuningConfig, bcfg: BootstrapConfig, n: int, shifts=None
) -> tuple[np.ndarray, int]:
    """``N`` pseudo statistics for a series with spot estimates ``spot``.

    Returns the statistics and the number of truncated bins summed over all
    pseudo paths.  With a sequence ``shifts`` the statistics are evaluated
    for each shift on the same pseudo paths and returned as an ``(N,
    len(shifts))`` array.
    """
    smoothed = smooth_from_spot(spot, cfg, bcfg, n)
    job = _Job(
        cfg=cfg,
        bcfg=bcfg,
        per_sample=smoothed.per_sample,
        eta_hat=math.sqrt(spot.noise_var_hat),
        weights=spot.weights,
        eta_sq=spot.noise_var_used,
        stat_eta=scale_eta(spot, cfg),
        shifts=(bcfg.shift_for(cfg),) if shifts is None else tuple(int(v) for v in shifts),
    )
    seeds = np.random.SeedSequence(bcfg.seed).spawn(bcfg.replications)
    if bcfg.workers == 1:
        out = _run_chunk(job, seeds)
    else:
        chunks = [seeds[i :: bcfg.workers] for i in range(bcfg.workers)]
        with ProcessPoolExecutor(bcfg.workers) as pool:
            parts = list(pool.map(_run_chunk, [job] * len(chunks), chunks))
        out = [None] * bcfg.replications
        for i, part in enumerate(parts):
            out[i :: bcfg.workers] = part
    stats = np.array([v for v, _ in out])
    if shifts is None:
        stats = stats[:, 0]
    fires = sum(f for _, f in out)
    if fires:
        logger.warning("truncation fired on %d bins across %d pseudo paths", fires, bcfg.replications)
    return stats, fires


def bootstrap_from_spot(spot: SpotVolSeries, cfg: TuningConfig, bcfg: BootstrapConfig, n: int) -> BootstrapResult:
    stat = compute_statistic(RuleKind.OVERLAP_TRUNC, spot, cfg)
    stats, fires = pseudo_statistics(spot, cfg, bcfg, n)
    return BootstrapResult(
        statistic=stat.value,
        pseudo_stats=stats,
        level=bcfg.level,
        truncation_fires=fires,
        eta_hat=math.sqrt(spot.noise_var_hat),
    )


def bootstrap_test(obs: ObservationSeries, cfg: TuningConfig, bcfg: BootstrapConfig) -> BootstrapResult:
    """Bootstrap-calibrated overlapping truncated test on ``obs``."""
    cfg.validate(obs.n)
    return bootstrap_from_spot(estimate_spot_vol(obs, cfg), cfg, bcfg, obs.n)


def bootstrap_quantile(obs: ObservationSeries, cfg: TuningConfig, bcfg: BootstrapConfig) -> float:
    """Empirical ``1 - level`` quantile of the pseudo statistics."""
    return bootstrap_test(obs, cfg, bcfg).quantile()
