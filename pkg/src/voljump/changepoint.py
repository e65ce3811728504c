"""Location of a volatility jump by the argmax of windowed differences."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .config import ObservationSeries, ParameterError, TuningConfig
from .spectral import estimate_spot_vol


@dataclass(frozen=True)
class ChangePointEstimate:
    theta_hat: float
    argmax_bin: int
    diamond_values: np.ndarray
    rate_bound: float | None = None

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat,
            "argmax_bin": self.argmax_bin,
            "rate_bound": self.rate_bound,
        }


def _check_window(cfg: TuningConfig) -> None:
    if cfg.bins < 2 * cfg.block_len + 1:
        raise ParameterError(
            f"bins={cfg.bins} too small for two windows of {cfg.block_len} bins"
        )


def diamond_stat(per_bin, i: int, cfg: TuningConfig) -> float:
    """``|sum of bins i-a+1..i  -  sum of bins i+1..i+a| / sqrt(a)`` (1-based bins)."""
    a = cfg.block_len
    if not a <= i <= cfg.bins - a:
        raise ParameterError(f"i={i} outside {a}..{cfg.bins - a}")
    per_bin = np.asarray(per_bin, dtype=np.float64)
    back = per_bin[i - a : i].sum()
    fwd = per_bin[i : i + a].sum()
    return float(abs(back - fwd) / math.sqrt(a))


def diamond_values(per_bin, cfg: TuningConfig) -> np.ndarray:
    """:func:`diamond_stat` for every ``i = a .. bins - a``."""
    _check_window(cfg)
    per_bin = np.ascontiguousarray(per_bin, dtype=np.float64)
    if per_bin.shape != (cfg.bins,):
        raise ParameterError(f"expected {cfg.bins} per-bin values, got {per_bin.shape}")
    return _kernels.diamond(per_bin, cfg.block_len)


def locate(per_bin, cfg: TuningConfig, delta: float | None = None, n: int | None = None) -> ChangePointEstimate:
    """Change-point estimate from per-bin spot volatilities.

    ``rate_bound`` is ``h |delta|^-1 sqrt(a log n)`` when both ``delta`` and
    ``n`` are given.
    """
    vals = diamond_values(per_bin, cfg)
    idx = int(np.argmax(vals)) + cfg.block_len
    rate = None
    if delta is not None and n is not None and delta != 0:
        rate = cfg.h / abs(delta) * math.sqrt(cfg.block_len * math.log(n))
    return ChangePointEstimate(theta_hat=idx * cfg.h, argmax_bin=idx, diamond_values=vals, rate_bound=rate)


def estimate_changepoint(
    obs: ObservationSeries, cfg: TuningConfig, delta: float | None = None
) -> ChangePointEstimate:
    """Estimate the volatility jump time from noisy observations.

    Uses untruncated adaptive spot estimates unless
    ``cfg.truncate_changepoint`` is set.
    """
    _check_window(cfg)
    spot = estimate_spot_vol(obs, cfg)
    per_bin = spot.per_bin
    if cfg.truncate_changepoint:
        per_bin = np.where(np.abs(per_bin) <= cfg.threshold, per_bin, 0.0)
    return locate(per_bin, cfg, delta=delta, n=obs.n)
