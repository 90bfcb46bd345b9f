"""Least squares solvers: exact, CG, sketch-and-solve and sketch-and-precondition.

Also the two matrix-valued relatives: CX regression ``min |A - C X|`` and
CUR-type regression ``min |C X R - A|``, both solved on sampled rows/columns.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
import scipy.linalg

from .linalg import (
    DegenerateInputError,
    DimensionError,
    RankDeficientWarning,
    as_matrix,
    as_vector,
    full_svd,
    pinv_flagged,
    pseudo_inverse,
    rank_tolerance,
)
from .sketch import (
    SketchSpec,
    _rng,
    leverage_scores,
    sketch_rows,
)

__all__ = [
    "LsrSolution",
    "lsr_exact",
    "lsr_cg",
    "lsr_sketched",
    "lsr_preconditioned",
    "cx_regression",
    "cur_core_regression",
    "default_precondition_size",
    "iteration_budget",
]


@dataclass(frozen=True)
class LsrSolution:
    x: np.ndarray
    objective: float
    iterations: int = 0
    kappa_estimate: float = None
    converged: bool = True
    flags: tuple = field(default_factory=tuple)


def _objective(A, b, x):
    r = A @ x - b
    return float(r @ r)


def _check_tall(A, b):
    A = as_matrix(A)
    b = as_vector(b)
    n, d = A.shape
    if n < d:
        raise DimensionError(f"least squares needs n >= d, got {n}x{d}")
    if b.shape[0] != n:
        raise DimensionError(f"b has length {b.shape[0]}, expected {n}")
    return A, b


def lsr_exact(A, b):
    """``x = A^+ b``."""
    A, b = _check_tall(A, b)
    x = pseudo_inverse(A) @ b
    return LsrSolution(x=x, objective=_objective(A, b, x))


def lsr_cg(A, b, tol=1e-10, maxit=1000):
    """Conjugate gradients on the normal equations ``A^T A x = A^T b`` (CGLS form).

    Stops once ``|A^T r| <= tol |A^T b|``.  If ``maxit`` runs out the last
    iterate is returned with ``converged=False``.
    """
    A, b = _check_tall(A, b)
    x = np.zeros(A.shape[1])
    r = b.copy()
    g = A.T @ r
    target = tol * np.linalg.norm(g)
    p = g.copy()
    gg = g @ g
    it = 0
    converged = math.sqrt(gg) <= target
    while not converged and it < maxit:
        q = A @ p
        qq = q @ q
        if qq == 0.0:
            break
        alpha = gg / qq
        x += alpha * p
        r -= alpha * q
        g = A.T @ r
        gg_new = g @ g
        it += 1
        if math.sqrt(gg_new) <= target:
            converged = True
            break
        p = g + (gg_new / gg) * p
        gg = gg_new
    flags = () if converged else ("not_converged",)
    return LsrSolution(x=x, objective=_objective(A, b, x), iterations=it,
                       converged=converged, flags=flags)


def _solve_small(M, rhs, name):
    """Least squares on a small dense system, pseudo-inverse if rank deficient."""
    F = full_svd(M)
    rho = int(np.count_nonzero(F.s > rank_tolerance(F.s, M.shape)))
    if rho < M.shape[1]:
        warnings.warn(f"{name} has rank {rho} < {M.shape[1]}; using pseudo-inverse",
                      RankDeficientWarning, stacklevel=3)
        return (F.V[:, :rho] / F.s[:rho]) @ (F.U[:, :rho].T @ rhs), True
    return scipy.linalg.lstsq(M, rhs, lapack_driver="gelsd")[0], False


def lsr_sketched(A, b, spec):
    """Sketch-and-solve: ``argmin |S^T (A x - b)|``.

    ``[A, b]`` is sketched jointly so that both sides see one draw of ``S``.
    """
    A, b = _check_tall(A, b)
    d = A.shape[1]
    if spec.output_size < d:
        raise DimensionError(f"sketch size {spec.output_size} < d={d}")
    sk = sketch_rows(np.column_stack([A, b]), spec)
    x, flagged = _solve_small(sk[:, :d], sk[:, d], "sketched system")
    return LsrSolution(x=x, objective=_objective(A, b, x),
                       flags=("rank_deficient",) if flagged else ())


def default_precondition_size(n, d):
    return min(d * d, 20 * d, n)


def iteration_budget(eps):
    return max(1, math.ceil(10 * math.log10(1.0 / eps)))


def _derived_seed(seed, stream):
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), stream])
    return int(ss.generate_state(1, np.uint64)[0])


def lsr_preconditioned(A, b, eps=1e-8, seed=0, spec=None, method="gd",
                       step=None, report_kappa=False):
    """Sketch-and-precondition least squares.

    A row sketch ``Y = S^T A`` gives ``Y = Q_Y R_Y`` and the preconditioner
    ``T = R_Y^{-1}``.  Starting from ``z0 = Q_Y^T S^T b`` the solver runs
    gradient descent (``method="gd"``) or CG (``method="cg"``) on
    ``|A T z - b|^2`` and returns ``x = T z``.  Gradient descent uses the
    exact line-search step unless a fixed ``step`` is given; a fixed step of
    1 diverges once a singular value of ``A T`` exceeds ``sqrt(2)``.  ``T`` is only ever applied
    through triangular solves; ``A T`` is never formed by the solver.

    The iteration stops once the relative gradient drops below
    ``eps / cond(R_Y)``, so the tolerance holds for ``x`` and not just ``z``,
    and never runs more than ``ceil(10 log10(1/eps))`` steps.

    ``report_kappa`` forms ``A T`` once, after solving, to report its
    condition number as a diagnostic.
    """
    A, b = _check_tall(A, b)
    n, d = A.shape
    if method not in ("gd", "cg"):
        raise ValueError(f"unknown method {method!r}")
    if spec is None:
        spec = SketchSpec("count_sketch", default_precondition_size(n, d), seed)
    if spec.output_size < d:
        raise DimensionError(f"sketch size {spec.output_size} < d={d}")
    AB = np.column_stack([A, b])
    flags = []
    for attempt in range(2):
        sk = sketch_rows(AB, spec)
        Q, R = scipy.linalg.qr(sk[:, :d], mode="economic")
        diag = np.abs(np.diag(R))
        if diag.min() > d * np.finfo(float).eps * diag.max():
            break
        if attempt == 1:
            raise DegenerateInputError("sketch R_Y is singular after resampling")
        flags.append("resampled")
        spec = SketchSpec(spec.kind, spec.s, _derived_seed(spec.seed, 1),
                          spec.stage2, spec.scale_columns)

    def T(v):
        return scipy.linalg.solve_triangular(R, v)

    def Tt(v):
        return scipy.linalg.solve_triangular(R, v, trans="T")

    z = Q.T @ sk[:, d]
    ref = np.linalg.norm(Tt(A.T @ b))
    tol = max(eps / np.linalg.cond(R), 1e-15) * ref
    budget = iteration_budget(eps)

    r = b - A @ T(z)
    g = Tt(A.T @ r)
    it = 0
    converged = np.linalg.norm(g) <= tol
    p = g.copy()
    gg = g @ g
    while not converged and it < budget:
        if method == "gd" and step is not None:
            z = z + step * g
            r = b - A @ T(z)
        elif method == "gd":
            q = A @ T(g)
            theta = gg / (q @ q)
            z = z + theta * g
            r = r - theta * q
        else:
            q = A @ T(p)
            alpha = gg / (q @ q)
            z = z + alpha * p
            r = r - alpha * q
        g = Tt(A.T @ r)
        it += 1
        gg_new = g @ g
        if math.sqrt(gg_new) <= tol:
            converged = True
            break
        if method == "cg":
            p = g + (gg_new / gg) * p
        gg = gg_new
    x = T(z)
    kappa = None
    if report_kappa:
        sv = scipy.linalg.svdvals(scipy.linalg.solve_triangular(R.T, A.T, lower=True).T)
        kappa = float(sv[0] / sv[-1])
    if not converged:
        flags.append("not_converged")
    return LsrSolution(x=x, objective=_objective(A, b, x), iterations=it,
                       kappa_estimate=kappa, converged=converged, flags=tuple(flags))


def _sample_rows(M, s, spec_kind, rng, what):
    """Row indices of ``M`` by uniform (without replacement) or leverage sampling."""
    m = M.shape[0]
    if spec_kind == "uniform":
        if not 1 <= s <= m:
            raise DimensionError(f"cannot sample {s} of {m} {what}")
        return np.sort(rng.choice(m, size=s, replace=False))
    if spec_kind == "leverage":
        if s < 1:
            raise DimensionError("sample size must be >= 1")
        lev = leverage_scores(M.T)
        return np.unique(rng.choice(m, size=s, replace=True, p=lev / lev.sum()))
    raise ValueError(f"unknown sampler {spec_kind!r}")


def cx_regression(A, C, spec):
    """``X = (S^T C)^+ (S^T A)``: approximate ``argmin_X |A - C X|_F``.

    Projection sketches are applied to ``[C, A]`` jointly.  Leverage-column
    specs sample rows by the row leverage scores of ``C``.
    """
    A = as_matrix(A)
    C = as_matrix(C, "C")
    if C.shape[0] != A.shape[0]:
        raise DimensionError("C and A must have the same number of rows")
    c = C.shape[1]
    if spec.output_size < c:
        raise DimensionError(f"sketch size {spec.output_size} < c={c}")
    if spec.kind in ("leverage_columns", "uniform_columns"):
        sampler = "leverage" if spec.kind == "leverage_columns" else "uniform"
        idx = _sample_rows(C, spec.s, sampler, _rng(spec.seed), "rows")
        SC, SA = C[idx], A[idx]
        if spec.scale_columns:
            if sampler == "leverage":
                lev = leverage_scores(C.T)
                w = np.sqrt(lev.sum() / (spec.s * lev[idx]))
            else:
                w = np.full(idx.size, np.sqrt(C.shape[0] / spec.s))
            SC, SA = SC * w[:, None], SA * w[:, None]
    else:
        sk = sketch_rows(np.column_stack([C, A]), spec)
        SC, SA = sk[:, :c], sk[:, c:]
    P, _ = pinv_flagged(SC, "sketched C")
    return P @ SA


def cur_core_regression(C, R, A, s_c, s_r, seed, sampler="leverage"):
    """``X = (C[Pc])^+ A[Pc, Pr] (R[:, Pr])^+``: approximate ``argmin |C X R - A|``.

    Rows ``Pc`` are sampled from the rows of ``C`` and columns ``Pr`` from the
    columns of ``R``, uniformly or by leverage score.
    """
    C = as_matrix(C, "C")
    R = as_matrix(R, "R")
    A = as_matrix(A)
    m, n = A.shape
    if C.shape[0] != m or R.shape[1] != n:
        raise DimensionError("C must be m x c and R must be r x n")
    if s_c > m or s_r > n:
        raise DimensionError(f"s_c <= {m} and s_r <= {n} required")
    rng = _rng(seed)
    pc = _sample_rows(C, s_c, sampler, rng, "rows")
    pr = _sample_rows(R.T, s_r, sampler, rng, "columns")
    Cp, _ = pinv_flagged(C[pc], "sampled C")
    Rp, _ = pinv_flagged(R[:, pr], "sampled R")
    return Cp @ A[np.ix_(pc, pr)] @ Rp
