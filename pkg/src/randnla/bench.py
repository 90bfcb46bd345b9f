"""Wall-clock comparison of the compiled and pure-numpy kernel backends."""

import time

import numpy as np

from . import _kernels
from .sketch import hash_streams

__all__ = ["kernel_cases", "time_kernels"]


def kernel_cases(scale=1, seed=0):
    """Named ``(function_name, args)`` workloads; ``scale`` multiplies the sizes."""
    rng = np.random.default_rng(seed)
    m, n, s = 64 * scale, 4096 * scale, 512
    A = rng.standard_normal((m, n))
    buckets, signs = hash_streams(seed, np.arange(n), s)
    Xa = rng.standard_normal((400 * scale, 8))
    Xb = rng.standard_normal((300 * scale, 8))
    pts = rng.standard_normal((20000 * scale, 4))
    cent = rng.standard_normal((16, 4))
    return {
        "fwht": ("fwht_rows", (A,)),
        "count_sketch_cols": ("count_sketch_cols", (A, buckets, signs, s)),
        "count_sketch_rows": ("count_sketch_rows", (np.ascontiguousarray(A.T), buckets, signs, s)),
        "rbf_block": ("rbf_block", (Xa, Xb, 1.5)),
        "nearest_centroid": ("nearest_centroid", (pts, cent)),
    }


def _best_of(fn, args, repeats):
    fn(*args)  # warm-up, and JIT compilation for the compiled backend
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def time_kernels(repeats=5, scale=1, seed=0):
    """Best-of-``repeats`` milliseconds per kernel and backend.

    Returns ``{case: {"numpy": ms, "numba": ms or None}}``; the compiled
    column is ``None`` when numba is not installed.
    """
    out = {}
    for case, (name, args) in kernel_cases(scale, seed).items():
        row = {"numpy": 1000 * _best_of(getattr(_kernels.numpy_impl, name), args, repeats)}
        if _kernels.numba_impl is not None:
            row["numba"] = 1000 * _best_of(getattr(_kernels.numba_impl, name), args, repeats)
        else:
            row["numba"] = None
        out[case] = row
    return out
