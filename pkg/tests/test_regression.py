import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from randnla.datasets import conditioned_lsr, noisy_lsr, powerlaw_matrix
from randnla.linalg import DimensionError, RankDeficientWarning, pseudo_inverse
from randnla.regression import (
    cur_core_regression,
    cx_regression,
    default_precondition_size,
    iteration_budget,
    lsr_cg,
    lsr_exact,
    lsr_preconditioned,
    lsr_sketched,
)
from randnla.sketch import SketchSpec


def relerr(x, ref):
    return np.linalg.norm(x - ref) / np.linalg.norm(ref)


def assert_objective_consistent(A, b, sol):
    r = A @ sol.x - b
    assert sol.objective == pytest.approx(float(r @ r), rel=1e-8, abs=1e-300)
    assert sol.objective >= 0


# ---------------------------------------------------------------- exact

def test_exact_identity():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(lsr_exact(np.eye(3), b).x, b)


def test_exact_consistent_system(rng):
    A = rng.standard_normal((30, 5))
    x0 = rng.standard_normal(5)
    sol = lsr_exact(A, A @ x0)
    np.testing.assert_allclose(sol.x, x0, rtol=1e-10)
    assert sol.objective <= 1e-20


def test_exact_normal_equations(rng):
    A, b, _ = noisy_lsr(50, 6, 1.0, 3)
    sol = lsr_exact(A, b)
    assert np.linalg.norm(A.T @ (A @ sol.x - b)) <= 1e-8 * np.linalg.norm(A, 2) * np.linalg.norm(b)
    assert_objective_consistent(A, b, sol)


def test_exact_rejects_wide():
    with pytest.raises(DimensionError):
        lsr_exact(np.ones((2, 3)), np.ones(2))


# ---------------------------------------------------------------- CG

def test_cg_orthonormal_columns_one_step(rng):
    Q = np.linalg.qr(rng.standard_normal((40, 6)))[0]
    b = rng.standard_normal(40)
    sol = lsr_cg(Q, b, tol=1e-12)
    assert sol.iterations == 1 and sol.converged


def test_cg_matches_exact(rng):
    A, b, _ = noisy_lsr(200, 10, 1.0, 5)
    np.testing.assert_allclose(lsr_cg(A, b, tol=1e-12).x, lsr_exact(A, b).x, rtol=1e-8)


def test_cg_not_converged_flag():
    A, b, _ = conditioned_lsr(500, 20, 1e6, seed=1)
    sol = lsr_cg(A, b, tol=1e-14, maxit=3)
    assert not sol.converged and "not_converged" in sol.flags and sol.iterations == 3


def test_cg_needs_ten_times_the_preconditioned_iterations():
    A, b, _ = conditioned_lsr(8000, 200, 1e6, seed=2)
    pre = lsr_preconditioned(A, b, eps=1e-8, seed=0)
    cg = lsr_cg(A, b, tol=1e-8, maxit=20_000)
    assert pre.converged and cg.converged
    assert cg.iterations >= 10 * pre.iterations


# ---------------------------------------------------------------- sketched

def test_sketched_with_all_rows_is_exact(rng):
    A, b, _ = noisy_lsr(40, 4, 1.0, 1)
    sol = lsr_sketched(A, b, SketchSpec("uniform_columns", 40, 0))
    np.testing.assert_allclose(sol.x, lsr_exact(A, b).x, rtol=1e-10)


def test_sketched_count_sketch_ratio():
    A, b, _ = noisy_lsr(2000, 10, 1.0, 0)
    best = lsr_exact(A, b).objective
    ratios = np.array([lsr_sketched(A, b, SketchSpec("count_sketch", 500, t)).objective / best
                       for t in range(50)])
    assert np.all(ratios >= 1 - 1e-12)
    assert np.mean(ratios <= 1.21) >= 0.9


@given(st.integers(0, 10_000))
def test_sketched_ratio_at_least_one_for_orthogonal_rhs(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((60, 3))
    b = rng.standard_normal(60)
    b -= A @ np.linalg.lstsq(A, b, rcond=None)[0]
    sol = lsr_sketched(A, b, SketchSpec("uniform_columns", 10, seed))
    assert np.isfinite(sol.objective)
    assert sol.objective >= (b @ b) * (1 - 1e-10)


def test_sketched_rank_deficient_is_flagged():
    A = np.zeros((20, 2))
    A[:, 0] = 1.0
    A[0, 1] = 1.0
    with pytest.warns(RankDeficientWarning):
        sol = lsr_sketched(A, np.ones(20), SketchSpec("uniform_columns", 3, 4))
    assert "rank_deficient" in sol.flags


def test_sketched_too_small():
    with pytest.raises(DimensionError):
        lsr_sketched(np.ones((10, 3)), np.ones(10), SketchSpec("gaussian", 2))


# ---------------------------------------------------------------- preconditioned

def test_precondition_defaults():
    assert default_precondition_size(10_000, 20) == 400
    assert default_precondition_size(10_000, 200) == 4000
    assert default_precondition_size(100, 20) == 100
    assert iteration_budget(1e-8) == 80


def test_preconditioned_kappa_bound():
    A, b, _ = conditioned_lsr(2000, 20, 1e6, seed=0)
    kappas = [lsr_preconditioned(A, b, seed=t, spec=SketchSpec("count_sketch", 400, t),
                                 report_kappa=True).kappa_estimate for t in range(50)]
    assert np.mean(np.array(kappas) <= 2) >= 0.9


@pytest.mark.parametrize("method", ["gd", "cg"])
def test_preconditioned_beats_cg_at_equal_budget(method):
    A, b, _ = conditioned_lsr(2000, 20, 1e6, seed=4)
    ref = lsr_exact(A, b).x
    pre = lsr_preconditioned(A, b, eps=1e-8, seed=1, spec=SketchSpec("count_sketch", 400, 1),
                             method=method)
    assert relerr(pre.x, ref) <= 1e-8
    assert pre.iterations <= iteration_budget(1e-8)
    cg = lsr_cg(A, b, tol=1e-16, maxit=max(pre.iterations, 1))
    assert relerr(cg.x, ref) > 1e-8
    assert_objective_consistent(A, b, pre)


def test_preconditioned_orthonormal_fast_path(rng):
    Q = np.linalg.qr(rng.standard_normal((1000, 10)))[0]
    b = rng.standard_normal(1000)
    sol = lsr_preconditioned(Q, b, eps=1e-10, seed=3)
    assert sol.iterations <= 2
    np.testing.assert_allclose(sol.x, Q.T @ b, rtol=1e-9)


def test_preconditioned_is_deterministic():
    A, b, _ = conditioned_lsr(500, 10, 1e3, seed=6)
    x1 = lsr_preconditioned(A, b, seed=9).x
    x2 = lsr_preconditioned(A, b, seed=9).x
    np.testing.assert_array_equal(x1, x2)


def test_preconditioned_rejects_unknown_method(rng):
    with pytest.raises(ValueError):
        lsr_preconditioned(np.eye(3), np.ones(3), method="sgd")


# ---------------------------------------------------------------- CX and CUR cores

def test_cx_all_rows_exact(rng):
    A = rng.standard_normal((30, 12))
    C = A[:, :4]
    X = cx_regression(A, C, SketchSpec("uniform_columns", 30, 0))
    np.testing.assert_allclose(X, pseudo_inverse(C) @ A, atol=1e-12)
    assert X.shape == (4, 12)


def test_cx_count_sketch_error_bound():
    A = powerlaw_matrix(500, 60, 0.5, 1)
    C = A[:, :5]
    eps = 0.2
    s = int(5 / eps + 5 ** 2)
    best = np.linalg.norm(A - C @ pseudo_inverse(C) @ A) ** 2
    ok = [np.linalg.norm(A - C @ cx_regression(A, C, SketchSpec("count_sketch", s, t))) ** 2
          <= (1 + eps) * best for t in range(50)]
    assert np.mean(ok) >= 0.9


def test_cur_core_full_selection_is_closed_form(rng):
    A = rng.standard_normal((20, 15))
    C, R = A[:, :4], A[:3]
    X = cur_core_regression(C, R, A, 20, 15, 0, sampler="uniform")
    np.testing.assert_allclose(X, pseudo_inverse(C) @ A @ pseudo_inverse(R), atol=1e-10)
    assert X.shape == (4, 3)


@pytest.mark.parametrize("sampler", ["leverage", "uniform"])
def test_cur_core_error_bound(sampler):
    A = powerlaw_matrix(200, 200, 1.0, 0)
    ok = []
    for t in range(50):
        r = np.random.default_rng(t)
        C = A[:, np.sort(r.choice(200, 10, replace=False))]
        R = A[np.sort(r.choice(200, 10, replace=False))]
        opt = np.linalg.norm(C @ pseudo_inverse(C) @ A @ pseudo_inverse(R) @ R - A) ** 2
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RankDeficientWarning)
            X = cur_core_regression(C, R, A, 80, 80, t, sampler)
        ok.append(np.linalg.norm(C @ X @ R - A) ** 2 <= 1.2 * opt)
    assert np.mean(ok) >= 0.9


def test_cur_core_dimension_checks(rng):
    A = rng.standard_normal((10, 8))
    with pytest.raises(DimensionError):
        cur_core_regression(A[:, :2], A[:2], A, 11, 4, 0)
    with pytest.raises(ValueError):
        cur_core_regression(A[:, :2], A[:2], A, 4, 4, 0, sampler="bogus")
