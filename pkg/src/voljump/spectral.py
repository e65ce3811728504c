"""Local spectral estimation of the spot volatility under additive noise.

The unit interval is cut into ``bins`` bins of length ``h = 1/bins``.  On
each bin the noisy increments are projected on a local sine basis; the
squared projections, bias corrected for the noise, are combined with
variance-minimizing weights into one spot volatility estimate per bin.
Those per-bin estimates are then averaged over big blocks of ``block_len``
bins, with or without overlap and truncation.

Bins are numbered ``k = 1, ..., bins`` and frequencies ``j = 1, ...,
n/bins - 1`` in the public functions; arrays are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .config import ObservationSeries, ParameterError, TuningConfig


def _max_freq(n: int, cfg: TuningConfig) -> int:
    return n // cfg.bins - 1


def _check_indices(j: int, k: int, cfg: TuningConfig, n: int) -> None:
    if not 1 <= j <= _max_freq(n, cfg):
        raise ParameterError(f"frequency j={j} outside 1..{_max_freq(n, cfg)}")
    if not 1 <= k <= cfg.bins:
        raise ParameterError(f"bin k={k} outside 1..{cfg.bins}")


def _on_bin(t, k: int, cfg: TuningConfig):
    u = np.asarray(t, dtype=np.float64) - (k - 1) * cfg.h
    return u, (u >= 0.0) & (u <= cfg.h)


def _scalarize(x):
    return float(x) if np.ndim(x) == 0 else x


def sine_basis(j: int, k: int, t, cfg: TuningConfig, n: int):
    """Local sine basis function ``Phi_jk(t)``, supported on bin ``k``.

    ``t`` may be a scalar or an array.
    """
    _check_indices(j, k, cfg, n)
    u, inside = _on_bin(t, k, cfg)
    val = math.sqrt(2.0 * cfg.bins) * np.sin(j * math.pi * cfg.bins * u)
    return _scalarize(np.where(inside, val, 0.0))


def phi_basis(j: int, k: int, t, n: int, cfg: TuningConfig):
    """Discrete-derivative companion ``phi_jk(t)`` of the sine basis."""
    _check_indices(j, k, cfg, n)
    u, inside = _on_bin(t, k, cfg)
    amp = 2.0 * n * math.sqrt(2.0 * cfg.bins) * math.sin(j * math.pi / (2.0 * n * cfg.h))
    val = amp * np.cos(j * math.pi * cfg.bins * u)
    return _scalarize(np.where(inside, val, 0.0))


def empirical_scalar_product(f, g, n: int) -> float:
    """Midpoint-grid inner product ``(1/n) sum f(t_i) g(t_i)``, ``t_i = (i - 1/2)/n``.

    ``f`` and ``g`` must accept a numpy array of times.
    """
    t = (np.arange(1, n + 1) - 0.5) / n
    fv = np.broadcast_to(np.asarray(f(t), dtype=np.float64), t.shape)
    gv = np.broadcast_to(np.asarray(g(t), dtype=np.float64), t.shape)
    return float(np.dot(fv, gv) / n)


@dataclass(frozen=True)
class SpectralGrid:
    """Basis tables for a given sample size, bin count and cut-off.

    ``basis[j-1, r-1]`` is ``Phi_j`` at the ``r``-th sample point of a bin;
    ``phi_norms[j-1]`` is ``[phi_j, phi_j]_n``.  Both are invariant under a
    shift of the bin on an aligned grid, so one table serves every bin.
    """

    n: int
    bins: int
    cutoff: int
    basis: np.ndarray
    phi_norms: np.ndarray

    @property
    def per_bin(self) -> int:
        return self.n // self.bins

    def coefficients(self, increments: np.ndarray) -> np.ndarray:
        """Spectral statistics ``S_jk`` as a ``(bins, cutoff)`` array."""
        return increments.reshape(self.bins, self.per_bin) @ self.basis.T

    def bias(self, eta_sq: float) -> np.ndarray:
        """Noise bias ``[phi_j, phi_j]_n * eta_sq / n`` for ``j <= cutoff``."""
        return self.phi_norms[: self.cutoff] * (eta_sq / self.n)


def _phi_norms_direct(n: int, bins: int) -> np.ndarray:
    m = n // bins
    j = np.arange(1, m, dtype=np.float64)
    amp = 2.0 * n * math.sqrt(2.0 * bins) * np.sin(j * math.pi / (2.0 * m))
    mid = (np.arange(1, m + 1) - 0.5) / m
    out = np.empty(m - 1)
    # chunked so large bins do not allocate an (m, m) table
    step = max(1, 2**20 // m)
    for lo in range(0, m - 1, step):
        hi = min(lo + step, m - 1)
        cos = np.cos(np.outer(j[lo:hi] * math.pi, mid))
        out[lo:hi] = amp[lo:hi] ** 2 * (cos**2).sum(axis=1) / n
    return out


@lru_cache(maxsize=32)
def spectral_grid(n: int, bins: int, cutoff: int) -> SpectralGrid:
    """Cached :class:`SpectralGrid`; tables are computed once per key."""
    if n % bins != 0:
        raise ParameterError(f"n={n} is not a multiple of bins={bins}")
    m = n // bins
    if not 1 <= cutoff <= m - 1:
        raise ParameterError(f"cutoff={cutoff} outside 1..{m - 1}")
    r = np.arange(1, m + 1)
    j = np.arange(1, cutoff + 1)
    basis = math.sqrt(2.0 * bins) * np.sin(np.pi * np.outer(j, r) / m)
    # the last sample point of a bin sits on the basis zero
    basis[:, -1] = 0.0
    basis.setflags(write=False)
    norms = _phi_norms_direct(n, bins)
    norms.setflags(write=False)
    return SpectralGrid(n=n, bins=bins, cutoff=cutoff, basis=basis, phi_norms=norms)


def _grid_for(obs: ObservationSeries, cfg: TuningConfig) -> SpectralGrid:
    cfg.validate(obs.n)
    return spectral_grid(obs.n, cfg.bins, cfg.cutoff)


def phi_norm(j: int, n: int, cfg: TuningConfig) -> float:
    """``[phi_jk, phi_jk]_n`` (independent of ``k``)."""
    _check_indices(j, 1, cfg, n)
    return float(spectral_grid(n, cfg.bins, 1).phi_norms[j - 1])


def spectral_statistic(obs: ObservationSeries, j: int, k: int, cfg: TuningConfig) -> float:
    """``S_jk(Y) = sum_i (Y_i - Y_{i-1}) Phi_jk(i/n)``.

    Only increments whose right end point lies in bin ``k`` contribute.
    """
    n = obs.n
    cfg.validate(n)
    _check_indices(j, k, cfg, n)
    m = n // cfg.bins
    r = np.arange(1, m)
    dy = obs.increments()[(k - 1) * m : k * m - 1]
    return float(math.sqrt(2.0 * cfg.bins) * np.dot(dy, np.sin(j * math.pi * r / m)))


def spectral_matrix(obs: ObservationSeries, cfg: TuningConfig) -> np.ndarray:
    """All ``S_jk`` for ``j <= cutoff`` as a ``(bins, cutoff)`` array."""
    return _grid_for(obs, cfg).coefficients(obs.increments())


def noise_variance_hat(obs: ObservationSeries) -> float:
    """Noise variance estimate ``sum (Y_i - Y_{i-1})^2 / (2n)``."""
    dy = obs.increments()
    return float(np.dot(dy, dy) / (2.0 * obs.n))


def _noise_for_correction(obs: ObservationSeries, cfg: TuningConfig) -> tuple[float, float]:
    eta_hat_sq = noise_variance_hat(obs)
    used = eta_hat_sq if cfg.noise_variance is None else float(cfg.noise_variance)
    return eta_hat_sq, used


def pilot_spot_vol(obs: ObservationSeries, k: int, cfg: TuningConfig, eta_sq: float) -> float:
    """Pilot estimate of the spot volatility at the start of bin ``k``.

    Averages the bias-corrected squared spectral statistics over the first
    ``pilot_freqs`` frequencies and over ``block_len`` bins ending with bin
    ``k`` (the first ``block_len`` bins for ``k < block_len``).  The result
    can be negative.
    """
    if eta_sq < 0:
        raise ParameterError("eta_sq must be nonnegative")
    grid = _grid_for(obs, cfg)
    _check_indices(1, k, cfg, obs.n)
    s = grid.coefficients(obs.increments())[:, : cfg.pilot_freqs]
    bias = grid.bias(eta_sq)[: cfg.pilot_freqs]
    lo = max(k - cfg.block_len, 0)
    hi = max(k - 1, cfg.block_len - 1)
    rows = s[lo : hi + 1] ** 2 - bias
    return float(rows.mean(axis=1).sum() / cfg.block_len)


def oracle_weights(sigma_sq: float, eta_sq: float, n: int, cfg: TuningConfig) -> np.ndarray:
    """Variance-minimizing weights over all frequencies ``1..n/bins - 1``.

    ``w_j`` is proportional to ``(sigma_sq + eta_sq/n [phi_j, phi_j]_n)**-2``
    and the weights sum to one.
    """
    if not sigma_sq > 0:
        raise ParameterError(f"sigma_sq must be positive, got {sigma_sq}")
    if eta_sq < 0:
        raise ParameterError("eta_sq must be nonnegative")
    norms = spectral_grid(n, cfg.bins, 1).phi_norms
    w = (sigma_sq + eta_sq / n * norms) ** -2
    return w / w.sum()


def spot_vol_estimate(
    obs: ObservationSeries, k: int, weights: np.ndarray, eta_sq: float, cfg: TuningConfig
) -> float:
    """Weighted bias-corrected spot volatility estimate on bin ``k``.

    Only the first ``cutoff`` weights are used, renormalized to sum to one.
    """
    grid = _grid_for(obs, cfg)
    _check_indices(1, k, cfg, obs.n)
    w = np.asarray(weights, dtype=np.float64)[: cfg.cutoff]
    if w.shape[0] < cfg.cutoff:
        raise ParameterError(f"need at least {cfg.cutoff} weights, got {w.shape[0]}")
    w = w / w.sum()
    s = grid.coefficients(obs.increments())[k - 1]
    return float(np.dot(w, s**2 - grid.bias(eta_sq)))


@dataclass(frozen=True)
class BlockAverages:
    """Big-block aggregates of per-bin spot estimates.

    ``plain[i]`` averages bins ``i*a+1 .. (i+1)*a`` (non-overlapping).
    ``overlap[i - a]`` and ``trunc[i - a]`` average bins ``i-a+1 .. i`` for
    ``i = a .. bins``; ``trunc`` zeroes bins above the threshold but keeps
    the divisor ``a``.
    """

    plain: np.ndarray
    overlap: np.ndarray
    trunc: np.ndarray
    block_len: int

    @property
    def plain_trunc(self) -> np.ndarray:
        """Truncated averages over the non-overlapping blocks."""
        m = self.plain.shape[0]
        return self.trunc[:: self.block_len][:m]


def block_averages(per_bin, cfg: TuningConfig) -> BlockAverages:
    per_bin = np.ascontiguousarray(per_bin, dtype=np.float64)
    if per_bin.shape != (cfg.bins,):
        raise ParameterError(f"expected {cfg.bins} per-bin values, got {per_bin.shape}")
    a = cfg.block_len
    if a > cfg.bins:
        raise ParameterError(f"block_len={a} exceeds bins={cfg.bins}")
    m = cfg.bins // a
    plain = per_bin[: m * a].reshape(m, a).mean(axis=1)
    overlap = _kernels.window_means(per_bin, a, math.inf)
    trunc = _kernels.window_means(per_bin, a, cfg.threshold)
    return BlockAverages(plain=plain, overlap=overlap, trunc=trunc, block_len=a)


@dataclass(frozen=True)
class SpotVolSeries:
    """Output of :func:`estimate_spot_vol`.

    ``noise_var_hat`` is the data-based noise variance estimate;
    ``noise_var_used`` is what entered the bias correction (the known value
    when the config supplies one).
    """

    per_bin: np.ndarray
    pilot: np.ndarray
    weights: np.ndarray
    noise_var_hat: float
    noise_var_used: float
    blocks: BlockAverages

    @property
    def block_plain(self) -> np.ndarray:
        return self.blocks.plain

    @property
    def block_overlap(self) -> np.ndarray:
        return self.blocks.overlap

    @property
    def block_trunc(self) -> np.ndarray:
        return self.blocks.trunc


def adaptive_weights(pilot: np.ndarray, bias: np.ndarray, floor: float) -> np.ndarray:
    """Per-bin normalized weights from pilot estimates clamped at ``floor``."""
    sig = np.maximum(pilot, floor)
    w = (sig[:, None] + bias[None, :]) ** -2
    return w / w.sum(axis=1, keepdims=True)


def estimate_spot_vol(obs: ObservationSeries, cfg: TuningConfig) -> SpotVolSeries:
    """Two-stage adaptive spot volatility estimates on every bin."""
    grid = _grid_for(obs, cfg)
    eta_hat_sq, eta_used = _noise_for_correction(obs, cfg)
    s = grid.coefficients(obs.increments())
    bias = grid.bias(eta_used)
    per_bin, pilot = _kernels.adaptive_spot(s * s, bias, cfg.pilot_freqs, cfg.block_len, cfg.pilot_floor)
    return SpotVolSeries(
        per_bin=per_bin,
        pilot=pilot,
        weights=adaptive_weights(pilot, bias, cfg.pilot_floor),
        noise_var_hat=eta_hat_sq,
        noise_var_used=eta_used,
        blocks=block_averages(per_bin, cfg),
    )
