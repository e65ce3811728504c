"""Observation container, tuning parameters and error types."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Raised for out-of-range indices or inconsistent tuning parameters."""


class FormatError(ValueError):
    """Raised when input data cannot be turned into an observation series."""


class BlockLengthWarning(UserWarning):
    """Block length too large for the assumed volatility regularity."""


@dataclass(frozen=True)
class ObservationSeries:
    """Noisy log-prices ``Y_0, ..., Y_n`` on the grid ``i/n`` of ``[0, 1]``."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise FormatError("observation series needs at least two values")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise FormatError(f"non-finite observation at index {bad}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class TuningConfig:
    """Tuning of the spectral estimators and the test statistics.

    Parameters
    ----------
    bins : int
        Number of bins ``1/h_n``.
    block_len : int
        Bins per big block ``alpha_n``.
    tau : float
        Truncation exponent in ``(0, 1)``; spot estimates above
        ``h_n**(tau - 1)`` in absolute value are discarded.
    regularity : float
        Regularity exponent of the volatility under the null, in ``(0, 1]``.
    pilot_freqs : int
        Number of frequencies ``J`` in the pilot estimator.
    cutoff : int
        Spectral cut-off ``J_n`` for the adaptive estimator.
    noise_variance : float, optional
        Known noise variance. When ``None`` the variance is estimated from
        the data.
    oracle_scale : bool
        Use the known noise variance (instead of the estimate) in the
        denominator of the test statistics.
    truncate_changepoint : bool
        Apply truncation to the spot estimates fed to the change-point
        estimator.
    pilot_floor : float
        Lower clamp applied to pilot estimates before they enter the weights.
    """

    bins: int = 120
    block_len: int = 15
    tau: float = 0.75
    regularity: float = 0.5
    pilot_freqs: int = 20
    cutoff: int = 50
    noise_variance: float | None = None
    oracle_scale: bool = False
    truncate_changepoint: bool = False
    pilot_floor: float = 1e-8

    def __post_init__(self):
        if self.bins < 1 or self.block_len < 1:
            raise ParameterError("bins and block_len must be positive")
        if self.block_len > self.bins:
            raise ParameterError(f"block_len={self.block_len} exceeds bins={self.bins}")
        if not 0.0 < self.tau < 1.0:
            raise ParameterError(f"tau must lie in (0, 1), got {self.tau}")
        if not 0.0 < self.regularity <= 1.0:
            raise ParameterError(f"regularity must lie in (0, 1], got {self.regularity}")
        if self.pilot_freqs < 1 or self.cutoff < 1:
            raise ParameterError("pilot_freqs and cutoff must be positive")
        if self.pilot_freqs > self.cutoff:
            raise ParameterError("pilot_freqs must not exceed cutoff")
        if self.noise_variance is not None and self.noise_variance < 0:
            raise ParameterError("noise_variance must be nonnegative")
        if self.oracle_scale and self.noise_variance is None:
            raise ParameterError("oracle_scale requires a known noise_variance")
        if self.pilot_floor <= 0:
            raise ParameterError("pilot_floor must be positive")

    @property
    def h(self) -> float:
        return 1.0 / self.bins

    @property
    def m_n(self) -> int:
        """Number of non-overlapping big blocks."""
        return self.bins // self.block_len

    @property
    def threshold(self) -> float:
        return self.h ** (self.tau - 1.0)

    def samples_per_bin(self, n: int) -> int:
        return n // self.bins

    def validate(self, n: int) -> None:
        """Check the configuration against a sample size ``n``."""
        if n <= 0:
            raise ParameterError("sample size must be positive")
        if n % self.bins != 0:
            raise ParameterError(f"n={n} is not a multiple of bins={self.bins}")
        per_bin = n // self.bins
        if self.cutoff > per_bin - 1:
            raise ParameterError(
                f"cutoff={self.cutoff} exceeds samples per bin minus one ({per_bin - 1})"
            )
        proxy = math.sqrt(self.block_len) * (self.block_len * self.h) ** self.regularity * math.sqrt(math.log(n))
        if proxy > 1.0:
            warnings.warn(
                f"block_len={self.block_len} is large for regularity {self.regularity} "
                f"(sqrt(a)(a h)^r sqrt(log n) = {proxy:.3g} > 1)",
                BlockLengthWarning,
                stacklevel=2,
            )

    def to_dict(self) -> dict:
        return asdict(self)


def choose_bins(n: int) -> int:
    """Divisor of ``n`` closest to ``sqrt(n) / log(n)``.

    Ties go to the smaller divisor.  The simulation defaults use ``bins=120``
    for ``n=30000`` instead, a constant multiple of this rate.
    """
    if n < 3:
        raise ParameterError("need n >= 3 to choose a bin count")
    target = math.sqrt(n) / math.log(n)
    divisors = set()
    for d in range(1, math.isqrt(n) + 1):
        if n % d == 0:
            divisors.update((d, n // d))
    return min(divisors, key=lambda d: (abs(d - target), d))
