"""The compiled and pure-numpy kernel backends compute the same quantities."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from randnla import _kernels
from randnla.bench import kernel_cases, time_kernels
from randnla.sketch import hash_streams

needs_numba = pytest.mark.skipif(_kernels.numba_impl is None, reason="numba not installed")
NAMES = ("fwht_rows", "count_sketch_cols", "count_sketch_rows", "rbf_block", "nearest_centroid")


@needs_numba
@pytest.mark.parametrize("case", sorted(kernel_cases(1, 3)))
def test_backends_agree_on_benchmark_workloads(case):
    name, args = kernel_cases(1, 3)[case]
    a = getattr(_kernels.numpy_impl, name)(*args)
    b = getattr(_kernels.numba_impl, name)(*args)
    if isinstance(a, tuple):
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_allclose(a[1], b[1], rtol=1e-12, atol=1e-12)
    else:
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@needs_numba
@given(st.integers(1, 9), st.integers(0, 6), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_count_sketch_backends_agree(m, logn, s, seed):
    n = 2 ** logn + seed % 3
    A = np.random.default_rng(seed).standard_normal((m, n))
    b, g = hash_streams(seed, np.arange(n), s)
    np.testing.assert_allclose(_kernels.numpy_impl.count_sketch_cols(A, b, g, s),
                               _kernels.numba_impl.count_sketch_cols(A, b, g, s), atol=1e-12)
    np.testing.assert_allclose(_kernels.numpy_impl.count_sketch_rows(A.T.copy(), b, g, s),
                               _kernels.numba_impl.count_sketch_rows(A.T.copy(), b, g, s),
                               atol=1e-12)


@needs_numba
@given(st.integers(0, 7), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_fwht_backends_agree(logn, m, seed):
    X = np.random.default_rng(seed).standard_normal((m, 2 ** logn))
    np.testing.assert_allclose(_kernels.numpy_impl.fwht_rows(X),
                               _kernels.numba_impl.fwht_rows(X), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("impl", ["numpy_impl", "numba_impl"])
def test_rbf_block_is_bitwise_stable_under_slicing(impl):
    backend = getattr(_kernels, impl)
    if backend is None:
        pytest.skip("numba not installed")
    rng = np.random.default_rng(1)
    X, Y = rng.standard_normal((60, 4)), rng.standard_normal((50, 4))
    K = backend.rbf_block(X, Y, 0.9)
    rows, cols = [3, 17, 59], [0, 49, 7]
    np.testing.assert_array_equal(backend.rbf_block(X[rows], Y[cols], 0.9), K[np.ix_(rows, cols)])
    S = backend.rbf_block(X, X, 0.9)
    np.testing.assert_array_equal(S, S.T)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, RANDNLA_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import randnla; print(randnla.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_active_backend_matches_environment():
    disabled = os.environ.get("RANDNLA_DISABLE_NUMBA", "").strip().lower() not in (
        "", "0", "false", "no")
    if disabled or _kernels.numba_impl is None:
        assert _kernels.BACKEND == "numpy"
    else:
        assert _kernels.BACKEND == "numba"


def test_time_kernels_reports_both_backends():
    rows = time_kernels(repeats=1, scale=1, seed=0)
    assert set(rows) == set(kernel_cases())
    for row in rows.values():
        assert row["numpy"] > 0
        assert row["numba"] is None or row["numba"] > 0
