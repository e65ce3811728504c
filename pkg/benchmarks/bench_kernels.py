"""Compare the compiled and numpy forms of the hot kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 200] [--pipeline]

Kernel timings use realistic shapes for the default design (n = 30000,
120 bins, 50 frequencies).  With ``--pipeline`` the end-to-end estimate plus
test on one simulated path is also timed in two subprocesses, one with
``VOLJUMP_DISABLE_NUMBA=1``.
"""

import argparse
import os
import subprocess
import sys
from timeit import repeat

import numpy as np

from voljump import _kernels
from voljump._accel import HAS_NUMBA


def kernel_inputs(rng):
    s2 = rng.exponential(size=(120, 50))
    bias = np.sort(rng.uniform(0, 0.3, 50))
    w = rng.random((120, 50))
    w /= w.sum(axis=1, keepdims=True)
    per_bin = rng.uniform(0.5, 1.0, 120)
    blocks = rng.uniform(0.5, 1.0, 106)
    var = rng.uniform(0.5, 1.0, 30001)
    dw = rng.standard_normal(30000) / np.sqrt(30000)
    jumps = np.zeros(30000)
    return {
        "adaptive_spot": (s2, bias, 20, 15, 1e-8),
        "weighted_spot": (s2, bias, w),
        "window_means": (per_bin, 15, 3.3),
        "max_ratio": (blocks, 15, 0.2),
        "diamond": (per_bin, 15),
        "euler_price": (4.0, 0.1 / 30000, var, dw, jumps),
    }


def best_time(fn, args, number):
    fn(*args)  # warm up, includes compilation for numba
    return min(repeat(lambda: fn(*args), number=number, repeat=5)) / number


PIPELINE = """
import time, warnings
warnings.simplefilter("ignore")
from voljump.config import TuningConfig
from voljump.paths import preset, simulate_path
from voljump.testing import TestRule, run_test
from voljump._accel import backend_name
cfg = TuningConfig()
run_test(simulate_path(preset("h1-default", seed=0)).observed, TestRule(), cfg)
start = time.perf_counter()
for s in range(REPS):
    run_test(simulate_path(preset("h1-default", seed=s)).observed, TestRule(), cfg)
print(backend_name(), (time.perf_counter() - start) / REPS)
"""


def pipeline(reps):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, VOLJUMP_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", PIPELINE.replace("REPS", str(reps))], env=env,
                             capture_output=True, text=True, check=True)
        name, secs = res.stdout.split()
        out[name] = float(secs)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200)
    parser.add_argument("--pipeline", action="store_true")
    parser.add_argument("--pipeline-reps", type=int, default=50)
    args = parser.parse_args()

    if not HAS_NUMBA:
        print("numba is not installed; only the numpy path can be timed")
    inputs = kernel_inputs(np.random.default_rng(0))
    print(f"{'kernel':<15}{'numpy [us]':>12}{'numba [us]':>12}{'speedup':>10}")
    for name, args_ in inputs.items():
        t_np = best_time(_kernels.NUMPY_KERNELS[name], args_, args.repeat)
        t_nb = best_time(_kernels.NUMBA_KERNELS[name], args_, args.repeat) if HAS_NUMBA else float("nan")
        print(f"{name:<15}{t_np * 1e6:>12.1f}{t_nb * 1e6:>12.1f}{t_np / t_nb:>10.2f}")

    if args.pipeline:
        times = pipeline(args.pipeline_reps)
        print()
        for name, secs in times.items():
            print(f"pipeline ({name}): {secs * 1e3:.2f} ms per path (simulate + estimate + test)")


if __name__ == "__main__":
    main()
