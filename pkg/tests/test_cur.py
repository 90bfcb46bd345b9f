import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from randnla.cur import (
    CurFactors,
    cur_faster,
    cur_faster_kernel,
    cur_prototype,
    default_secondary_size,
    optimal_core,
)
from randnla.datasets import low_rank_matrix, powerlaw_matrix
from randnla.linalg import DimensionError, RankDeficientWarning
from randnla.spsd import KernelView, rbf_kernel


def quiet(fn, *a, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientWarning)
        return fn(*a, **kw)


def test_full_selection_reproduces_matrix(rng):
    A = rng.standard_normal((12, 9))
    f = cur_prototype(A, 9, 12, seed=0)
    assert np.linalg.norm(f.reconstruct() - A) <= 1e-10 * np.linalg.norm(A)


def test_low_rank_exact_reconstruction():
    A = low_rank_matrix(60, 50, 4, 3)
    f = cur_prototype(A, 6, 6, seed=1)
    assert np.linalg.norm(f.reconstruct() - A) <= 1e-8 * np.linalg.norm(A)


def test_factors_are_verbatim_columns_and_rows(rng):
    A = rng.standard_normal((30, 20))
    f = quiet(cur_faster, A, 5, 4, seed=2)
    np.testing.assert_array_equal(f.C, A[:, f.col_indices])
    np.testing.assert_array_equal(f.R, A[f.row_indices])
    assert f.C.shape == (30, 5) and f.U.shape == (5, 4) and f.R.shape == (4, 20)


def test_explicit_indices(rng):
    A = rng.standard_normal((10, 8))
    f = cur_prototype(A, 2, 2, col_indices=[1, 5], row_indices=[0, 9])
    np.testing.assert_array_equal(f.C, A[:, [1, 5]])
    np.testing.assert_array_equal(f.R, A[[0, 9]])


def test_full_secondary_selection_is_optimal_core(rng):
    A = rng.standard_normal((25, 20))
    f = cur_faster(A, 4, 5, p_c=25, p_r=20, seed=3)
    np.testing.assert_allclose(f.U, optimal_core(A, f.C, f.R), atol=1e-10)


def test_default_secondary_size():
    assert default_secondary_size(15, 10) == 50


def test_prototype_never_worse_than_faster():
    A = powerlaw_matrix(150, 120, 1.0, 2)
    for t in range(10):
        f = quiet(cur_faster, A, 8, 8, seed=t)
        U = optimal_core(A, f.C, f.R)
        assert np.linalg.norm(A - f.C @ U @ f.R) <= np.linalg.norm(A - f.reconstruct()) * (1 + 1e-12)


def test_faster_leverage_ratio():
    A = powerlaw_matrix(300, 300, 1.0, 0)
    ok = []
    for t in range(50):
        f = quiet(cur_faster, A, 15, 15, seed=t, sampler="leverage")
        best = np.linalg.norm(A - f.C @ optimal_core(A, f.C, f.R) @ f.R) ** 2
        ok.append(np.linalg.norm(A - f.reconstruct()) ** 2 <= 1.25 * best)
    assert np.mean(ok) >= 0.8


def test_secondary_sets_contain_primary(rng):
    A = rng.standard_normal((40, 30))
    f = quiet(cur_faster, A, 3, 4, seed=5, sampler="leverage")
    assert np.all(np.isin(f.row_indices, f.secondary_rows))
    assert np.all(np.isin(f.col_indices, f.secondary_cols))
    assert np.all(np.diff(f.secondary_rows) > 0) and np.all(np.diff(f.secondary_cols) > 0)


def test_rank_deficient_block_is_flagged():
    A = np.ones((20, 20))
    with pytest.warns(RankDeficientWarning):
        f = cur_faster(A, 3, 3, seed=0)
    assert f.flagged


def test_kernel_cur_equals_materialized_bitwise(rng):
    Xtr = rng.standard_normal((120, 3))
    Xte = rng.standard_normal((90, 3))
    K = rbf_kernel(Xte, Xtr, 1.5)
    for seed in range(5):
        lazy = quiet(cur_faster_kernel, Xte, Xtr, 1.5, 10, 8, seed=seed)
        dense = quiet(cur_faster, K, 10, 8, seed=seed)
        for a, b in ((lazy.C, dense.C), (lazy.U, dense.U), (lazy.R, dense.R)):
            np.testing.assert_array_equal(a, b)


def test_kernel_cur_entry_budget(rng):
    m, n, c, r = 150, 200, 10, 12
    Xtr = rng.standard_normal((n, 4))
    Xte = rng.standard_normal((m, 4))
    f = quiet(cur_faster_kernel, Xte, Xtr, 2.0, c, r, seed=1)
    pc, pr = f.secondary_rows.size, f.secondary_cols.size
    assert pc <= default_secondary_size(c, r) + r and pr <= default_secondary_size(c, r) + c
    assert f.entries_visited == m * c + n * r + pc * pr


def test_single_test_point_with_many_rows_is_rejected(rng):
    with pytest.raises(DimensionError):
        cur_faster_kernel(rng.standard_normal((1, 2)), rng.standard_normal((10, 2)), 1.0, 3, 2)


def test_unknown_sampler(rng):
    with pytest.raises(ValueError):
        cur_faster(np.eye(4), 2, 2, sampler="bogus")


class _Recording:
    """Array stand-in that logs the operand shapes of every product."""

    log = []

    def __init__(self, M):
        self.M = np.asarray(M)

    def __matmul__(self, other):
        other = np.asarray(other)
        _Recording.log.append((self.M.shape, other.shape))
        return self.M @ other


def test_apply_costs_three_thin_products(rng):
    m, n, c, r = 40, 50, 4, 3
    f = CurFactors(C=_Recording(rng.standard_normal((m, c))), U=_Recording(rng.standard_normal((c, r))),
                   R=_Recording(rng.standard_normal((r, n))), col_indices=np.arange(c),
                   row_indices=np.arange(r))
    _Recording.log = []
    y = f.apply(rng.standard_normal(n))
    assert y.shape == (m,)
    assert _Recording.log == [((r, n), (n,)), ((c, r), (r,)), ((m, c), (c,))]
    flops = sum(a[0] * a[1] for a, _ in _Recording.log)
    assert flops == n * r + c * r + m * c


@given(st.integers(0, 2**32 - 1))
def test_cur_deterministic(seed):
    A = np.random.default_rng(seed % 100).standard_normal((20, 15))
    a = quiet(cur_faster, A, 3, 3, seed=seed)
    b = quiet(cur_faster, A, 3, 3, seed=seed)
    np.testing.assert_array_equal(a.U, b.U)
    np.testing.assert_array_equal(a.col_indices, b.col_indices)
