"""Maximum statistics for volatility jumps and their Gumbel calibration."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .config import ObservationSeries, ParameterError, TuningConfig
from .spectral import SpotVolSeries, estimate_spot_vol


class RuleKind(str, enum.Enum):
    NON_OVERLAP = "nov"
    OVERLAP = "ov"
    NON_OVERLAP_TRUNC = "nov-trunc"
    OVERLAP_TRUNC = "ov-trunc"

    @property
    def overlapping(self) -> bool:
        return self in (RuleKind.OVERLAP, RuleKind.OVERLAP_TRUNC)

    @property
    def truncated(self) -> bool:
        return self in (RuleKind.NON_OVERLAP_TRUNC, RuleKind.OVERLAP_TRUNC)


@dataclass(frozen=True)
class TestRule:
    __test__ = False

    kind: RuleKind = RuleKind.OVERLAP_TRUNC
    level: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if not 0.0 < self.level < 1.0:
            raise ParameterError(f"level must lie in (0, 1), got {self.level}")


class MaxStat(NamedTuple):
    value: float
    index: int
    degenerate: bool


def _scale(eta_hat: float) -> float:
    if eta_hat < 0:
        raise ParameterError("eta_hat must be nonnegative")
    return math.sqrt(8.0 * eta_hat)


def stat_nonoverlap(blocks, eta_hat: float) -> MaxStat:
    """Max over consecutive blocks of ``|B_i - B_{i+1}| / (sqrt(8 eta) |B_{i+1}|^(3/4))``.

    ``index`` is the 0-based ``i`` attaining the maximum (smallest on ties).
    A zero denominator gives an infinite value and ``degenerate=True``.
    """
    blocks = np.ascontiguousarray(blocks, dtype=np.float64)
    if blocks.shape[0] < 2:
        raise ParameterError("need at least two blocks")
    value, idx, degenerate = _kernels.max_ratio(blocks, 1, _scale(eta_hat))
    return MaxStat(float(value), int(idx), bool(degenerate))


def stat_overlap(blocks_ov, eta_hat: float, cfg: TuningConfig) -> MaxStat:
    """Overlapping-block version with shift ``block_len``.

    ``blocks_ov[0]`` corresponds to grid index ``block_len``; the returned
    ``index`` is on that grid, i.e. in ``block_len .. bins - block_len``.
    """
    blocks_ov = np.ascontiguousarray(blocks_ov, dtype=np.float64)
    a = cfg.block_len
    if blocks_ov.shape[0] < a + 1:
        raise ParameterError(f"need at least {a + 1} overlapping blocks")
    value, idx, degenerate = _kernels.max_ratio(blocks_ov, a, _scale(eta_hat))
    return MaxStat(float(value), int(idx) + a, bool(degenerate))


def gumbel_cdf(x: float) -> float:
    """Limit law ``exp(-exp(-x) / sqrt(pi))``."""
    return math.exp(-math.exp(-x) / math.sqrt(math.pi))


def gumbel_quantile(alpha: float) -> float:
    """``c_alpha``, the ``1 - alpha`` quantile of the limit law."""
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return -math.log(-math.log1p(-alpha)) - 0.5 * math.log(math.pi)


def _m_n(cfg: TuningConfig) -> int:
    m = cfg.m_n
    if m < 3:
        raise ParameterError(f"need at least 3 big blocks, got m_n={m}")
    return m


def gamma_m(m: int) -> float:
    lm = math.log(m)
    return math.sqrt(4.0 * lm - 2.0 * math.log(lm))


def critical_value(rule: TestRule, cfg: TuningConfig) -> float:
    """Rejection threshold for the raw statistic of ``rule``."""
    m = _m_n(cfg)
    c = gumbel_quantile(rule.level)
    lm = math.log(m)
    a = cfg.block_len
    if rule.kind.overlapping:
        return (c + 2.0 * lm + 0.5 * math.log(lm) + math.log(3.0)) / math.sqrt(lm * a)
    return (c / math.sqrt(lm) + gamma_m(m)) / math.sqrt(a)


def standardize(rule: TestRule, statistic: float, cfg: TuningConfig) -> float:
    """Centered and scaled statistic whose limit law is :func:`gumbel_cdf`."""
    m = _m_n(cfg)
    lm = math.log(m)
    root_a = math.sqrt(cfg.block_len)
    if rule.kind.overlapping:
        return math.sqrt(lm) * root_a * statistic - 2.0 * lm - 0.5 * math.log(lm) - math.log(3.0)
    return math.sqrt(lm) * (root_a * statistic - gamma_m(m))


def p_value(standardized: float) -> float:
    p = -math.expm1(-math.exp(-standardized) / math.sqrt(math.pi))
    return min(max(p, 0.0), 1.0)


def scale_eta(spot: SpotVolSeries, cfg: TuningConfig) -> float:
    """Noise standard deviation used in the statistic denominators."""
    if cfg.oracle_scale:
        return math.sqrt(cfg.noise_variance)
    return math.sqrt(spot.noise_var_hat)


def compute_statistic(kind: RuleKind, spot: SpotVolSeries, cfg: TuningConfig) -> MaxStat:
    kind = RuleKind(kind)
    eta_hat = scale_eta(spot, cfg)
    if kind is RuleKind.NON_OVERLAP:
        return stat_nonoverlap(spot.blocks.plain, eta_hat)
    if kind is RuleKind.NON_OVERLAP_TRUNC:
        return stat_nonoverlap(spot.blocks.plain_trunc, eta_hat)
    if kind is RuleKind.OVERLAP:
        return stat_overlap(spot.blocks.overlap, eta_hat, cfg)
    return stat_overlap(spot.blocks.trunc, eta_hat, cfg)


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    rule: TestRule
    statistic: float
    standardized: float
    critical: float
    p_value: float
    reject: bool
    m_n: int
    gamma_mn: float
    argmax_index: int
    degenerate: bool
    eta_hat: float

    def to_dict(self) -> dict:
        return {
            "rule": self.rule.kind.value,
            "level": self.rule.level,
            "statistic": self.statistic,
            "standardized": self.standardized,
            "critical": self.critical,
            "p_value": self.p_value,
            "reject": self.reject,
            "m_n": self.m_n,
            "gamma_mn": self.gamma_mn,
            "argmax_index": self.argmax_index,
            "degenerate": self.degenerate,
            "eta_hat": self.eta_hat,
        }


def report_from_spot(spot: SpotVolSeries, rule: TestRule, cfg: TuningConfig) -> TestReport:
    m = _m_n(cfg)
    stat = compute_statistic(rule.kind, spot, cfg)
    crit = critical_value(rule, cfg)
    z = standardize(rule, stat.value, cfg)
    return TestReport(
        rule=rule,
        statistic=stat.value,
        standardized=z,
        critical=crit,
        p_value=p_value(z),
        reject=bool(stat.degenerate or stat.value >= crit),
        m_n=m,
        gamma_mn=gamma_m(m),
        argmax_index=stat.index,
        degenerate=stat.degenerate,
        eta_hat=scale_eta(spot, cfg),
    )


def run_test(obs: ObservationSeries, rule: TestRule, cfg: TuningConfig) -> TestReport:
    """Estimate spot volatilities and evaluate ``rule`` on ``obs``."""
    _m_n(cfg)
    return report_from_spot(estimate_spot_vol(obs, cfg), rule, cfg)
