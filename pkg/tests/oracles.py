"""Brute-force reference implementations written as plain loops.

They follow the textbook definitions term by term and share no code with
the package apart from the basis functions themselves, so agreement with
the vectorized pipeline is a meaningful check on small grids.
"""

import math

import numpy as np


def phi_norm_closed(j, n, bins):
    m = n // bins
    return 4.0 * n * n * math.sin(j * math.pi / (2.0 * m)) ** 2


def spectral_stats(y, bins, cutoff):
    n = len(y) - 1
    h = 1.0 / bins
    out = np.zeros((bins, cutoff))
    for k in range(1, bins + 1):
        for j in range(1, cutoff + 1):
            acc = 0.0
            for i in range(1, n + 1):
                u = i / n - (k - 1) * h
                if 0.0 <= u <= h + 1e-15:
                    acc += (y[i] - y[i - 1]) * math.sqrt(2.0 * bins) * math.sin(j * math.pi * bins * u)
            out[k - 1, j - 1] = acc
    return out


def noise_var(y):
    n = len(y) - 1
    return sum((y[i] - y[i - 1]) ** 2 for i in range(1, n + 1)) / (2.0 * n)


def per_bin_estimates(y, bins, block_len, pilot_freqs, cutoff, eta_sq=None, floor=1e-8):
    n = len(y) - 1
    s = spectral_stats(y, bins, cutoff)
    if eta_sq is None:
        eta_sq = noise_var(y)
    bias = [phi_norm_closed(j, n, bins) * eta_sq / n for j in range(1, cutoff + 1)]
    est = np.zeros(bins)
    pilots = np.zeros(bins)
    for k in range(1, bins + 1):
        if k < block_len:
            window = range(1, block_len + 1)
        else:
            window = range(k - block_len + 1, k + 1)
        total = 0.0
        for kk in window:
            total += sum(s[kk - 1, j] ** 2 - bias[j] for j in range(pilot_freqs)) / pilot_freqs
        pilot = total / block_len
        pilots[k - 1] = pilot
        sig = max(pilot, floor)
        raw = [(sig + bias[j]) ** -2 for j in range(cutoff)]
        norm = sum(raw)
        est[k - 1] = sum(raw[j] / norm * (s[k - 1, j] ** 2 - bias[j]) for j in range(cutoff))
    return est, pilots


def backward_means(per_bin, block_len, threshold=math.inf):
    bins = len(per_bin)
    out = []
    for i in range(block_len, bins + 1):
        total = 0.0
        for l in range(i - block_len + 1, i + 1):
            v = per_bin[l - 1]
            if abs(v) <= threshold:
                total += v
        out.append(total / block_len)
    return np.array(out)


def plain_means(per_bin, block_len):
    m = len(per_bin) // block_len
    return np.array([sum(per_bin[i * block_len : (i + 1) * block_len]) / block_len for i in range(m)])


def max_ratio(blocks, shift, eta):
    best, arg = -1.0, -1
    for i in range(len(blocks) - shift):
        den = math.sqrt(8.0 * eta) * abs(blocks[i + shift]) ** 0.75
        val = math.inf if den == 0 else abs(blocks[i] - blocks[i + shift]) / den
        if val > best:
            best, arg = val, i
    return best, arg


def diamond(per_bin, block_len):
    bins = len(per_bin)
    out = []
    for i in range(block_len, bins - block_len + 1):
        back = sum(per_bin[i - block_len : i])
        fwd = sum(per_bin[i : i + block_len])
        out.append(abs(back - fwd) / math.sqrt(block_len))
    return np.array(out)
