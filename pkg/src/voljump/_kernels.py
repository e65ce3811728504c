"""Hot numeric kernels, each in a loop form (compiled with numba) and a
vectorized numpy form.

The public names at the bottom of the module point at whichever backend
``_accel.USE_NUMBA`` selects.  Both forms are kept importable so the test
suite and the benchmark can compare them directly.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# adaptive spot volatility from squared spectral statistics
# ---------------------------------------------------------------------------


def adaptive_spot_loop(s2, bias, pilot_freqs, block_len, floor):
    n_bins, n_freq = s2.shape
    per_freq_pilot = np.empty(n_bins)
    for k in range(n_bins):
        acc = 0.0
        for j in range(pilot_freqs):
            acc += s2[k, j] - bias[j]
        per_freq_pilot[k] = acc / pilot_freqs

    pilot = np.empty(n_bins)
    est = np.empty(n_bins)
    for k in range(n_bins):
        lo = k + 1 - block_len
        if lo < 0:
            lo = 0
        hi = k if k > block_len - 1 else block_len - 1
        if hi > n_bins - 1:
            hi = n_bins - 1
        acc = 0.0
        for ell in range(lo, hi + 1):
            acc += per_freq_pilot[ell]
        pilot[k] = acc / block_len

        sig = pilot[k] if pilot[k] > floor else floor
        norm = 0.0
        num = 0.0
        for j in range(n_freq):
            w = 1.0 / (sig + bias[j]) ** 2
            norm += w
            num += w * (s2[k, j] - bias[j])
        est[k] = num / norm
    return est, pilot


def adaptive_spot_numpy(s2, bias, pilot_freqs, block_len, floor):
    n_bins = s2.shape[0]
    corrected = s2 - bias
    per_freq_pilot = corrected[:, :pilot_freqs].mean(axis=1)
    csum = np.concatenate(([0.0], np.cumsum(per_freq_pilot)))
    k = np.arange(n_bins)
    lo = np.maximum(k + 1 - block_len, 0)
    hi = np.minimum(np.maximum(k, block_len - 1), n_bins - 1)
    pilot = (csum[hi + 1] - csum[lo]) / block_len
    sig = np.maximum(pilot, floor)
    w = (sig[:, None] + bias[None, :]) ** -2
    w /= w.sum(axis=1, keepdims=True)
    est = (w * corrected).sum(axis=1)
    return est, pilot


def weighted_spot_loop(s2, bias, weights):
    n_bins, n_freq = s2.shape
    est = np.empty(n_bins)
    for k in range(n_bins):
        acc = 0.0
        for j in range(n_freq):
            acc += weights[k, j] * (s2[k, j] - bias[j])
        est[k] = acc
    return est


def weighted_spot_numpy(s2, bias, weights):
    return (weights * (s2 - bias)).sum(axis=1)


# ---------------------------------------------------------------------------
# overlapping block means, optionally truncated
# ---------------------------------------------------------------------------


def window_means_loop(per_bin, block_len, threshold):
    n_bins = per_bin.shape[0]
    out = np.empty(n_bins - block_len + 1)
    for i in range(out.shape[0]):
        acc = 0.0
        for ell in range(i, i + block_len):
            x = per_bin[ell]
            if abs(x) <= threshold:
                acc += x
        out[i] = acc / block_len
    return out


def window_means_numpy(per_bin, block_len, threshold):
    kept = np.where(np.abs(per_bin) <= threshold, per_bin, 0.0)
    # direct sums (not cumsum differences) so both backends agree to rounding
    windows = np.lib.stride_tricks.sliding_window_view(kept, block_len)
    return windows.sum(axis=1) / block_len


# ---------------------------------------------------------------------------
# max of rescaled block differences
# ---------------------------------------------------------------------------


def max_ratio_loop(blocks, shift, scale):
    best = -1.0
    best_idx = 0
    degenerate = False
    for i in range(blocks.shape[0] - shift):
        den = scale * abs(blocks[i + shift]) ** 0.75
        if den == 0.0:
            degenerate = True
            val = math.inf
        else:
            val = abs(blocks[i] - blocks[i + shift]) / den
        if val > best:
            best = val
            best_idx = i
    return best, best_idx, degenerate


def max_ratio_numpy(blocks, shift, scale):
    num = np.abs(blocks[:-shift] - blocks[shift:])
    den = scale * np.abs(blocks[shift:]) ** 0.75
    zero = den == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(zero, np.inf, num / np.where(zero, 1.0, den))
    idx = int(np.argmax(vals))
    return float(vals[idx]), idx, bool(zero.any())


# ---------------------------------------------------------------------------
# forward/backward window differences for the change-point estimator
# ---------------------------------------------------------------------------


def diamond_loop(per_bin, block_len):
    n_bins = per_bin.shape[0]
    out = np.empty(n_bins - 2 * block_len + 1)
    root = math.sqrt(block_len)
    for m in range(out.shape[0]):
        i = m + block_len
        back = 0.0
        for ell in range(i - block_len, i):
            back += per_bin[ell]
        fwd = 0.0
        for ell in range(i, i + block_len):
            fwd += per_bin[ell]
        out[m] = abs(back - fwd) / root
    return out


def diamond_numpy(per_bin, block_len):
    sums = np.lib.stride_tricks.sliding_window_view(per_bin, block_len).sum(axis=1)
    back = sums[: sums.shape[0] - block_len]
    fwd = sums[block_len:]
    return np.abs(back - fwd) / math.sqrt(block_len)


# ---------------------------------------------------------------------------
# Euler-Maruyama step for the log-price
# ---------------------------------------------------------------------------


def euler_price_loop(x0, drift_step, var_path, dw, jumps):
    n = dw.shape[0]
    x = np.empty(n + 1)
    x[0] = x0
    for i in range(n):
        v = var_path[i]
        sd = math.sqrt(v) if v > 0.0 else 0.0
        step = drift_step + sd * dw[i] + jumps[i]
        x[i + 1] = x[i] + step
    return x


def euler_price_numpy(x0, drift_step, var_path, dw, jumps):
    sd = np.sqrt(np.maximum(var_path[:-1], 0.0))
    steps = drift_step + sd * dw + jumps
    # same summation order as the loop form
    return np.cumsum(np.concatenate(([x0], steps)))


LOOP_KERNELS = {
    "adaptive_spot": adaptive_spot_loop,
    "weighted_spot": weighted_spot_loop,
    "window_means": window_means_loop,
    "max_ratio": max_ratio_loop,
    "diamond": diamond_loop,
    "euler_price": euler_price_loop,
}

NUMPY_KERNELS = {
    "adaptive_spot": adaptive_spot_numpy,
    "weighted_spot": weighted_spot_numpy,
    "window_means": window_means_numpy,
    "max_ratio": max_ratio_numpy,
    "diamond": diamond_numpy,
    "euler_price": euler_price_numpy,
}

NUMBA_KERNELS = {name: njit(cache=True)(fn) for name, fn in LOOP_KERNELS.items()}

_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS

adaptive_spot = _ACTIVE["adaptive_spot"]
weighted_spot = _ACTIVE["weighted_spot"]
window_means = _ACTIVE["window_means"]
max_ratio = _ACTIVE["max_ratio"]
diamond = _ACTIVE["diamond"]
euler_price = _ACTIVE["euler_price"]
