"""CUR decomposition ``A ~ C U R`` from actual columns and rows of ``A``."""

from dataclasses import dataclass

import numpy as np

from .linalg import DimensionError, as_matrix, condensed_svd, pinv_flagged, pseudo_inverse
from .sketch import _rng
from .spsd import KernelSpec, KernelView, as_entry_source

__all__ = [
    "CurFactors",
    "cur_prototype",
    "cur_faster",
    "cur_faster_kernel",
    "optimal_core",
    "default_secondary_size",
]


@dataclass(frozen=True)
class CurFactors:
    C: np.ndarray
    U: np.ndarray
    R: np.ndarray
    col_indices: np.ndarray
    row_indices: np.ndarray
    secondary_rows: np.ndarray = None
    secondary_cols: np.ndarray = None
    entries_visited: int = 0
    flagged: bool = False

    def reconstruct(self):
        return self.C @ self.U @ self.R

    def apply(self, x):
        """``C (U (R x))``: one ``r x n``, one ``c x r`` and one ``m x c`` product."""
        return self.C @ (self.U @ (self.R @ x))


def default_secondary_size(c, r):
    return 2 * (c + r)


def _selections(m, n, c, r, rng):
    if not 1 <= c <= n:
        raise DimensionError(f"need 1 <= c={c} <= n={n}")
    if not 1 <= r <= m:
        raise DimensionError(f"need 1 <= r={r} <= m={m}")
    SC = np.sort(rng.choice(n, size=c, replace=False))
    SR = np.sort(rng.choice(m, size=r, replace=False))
    return SC, SR


def optimal_core(A, C, R):
    """``C^+ A R^+``, the Frobenius-optimal core for fixed ``C`` and ``R``."""
    A = as_matrix(A)
    return pseudo_inverse(C) @ A @ pseudo_inverse(R)


def cur_prototype(A, c, r, seed=0, col_indices=None, row_indices=None):
    """Uniformly chosen ``c`` columns and ``r`` rows with the optimal core ``C^+ A R^+``.

    Explicit ``col_indices``/``row_indices`` replace the random draw.
    """
    src = as_entry_source(A)
    m, n = src.shape
    if col_indices is None or row_indices is None:
        SC, SR = _selections(m, n, c, r, _rng(seed))
    if col_indices is not None:
        SC = np.asarray(col_indices, dtype=np.int64)
    if row_indices is not None:
        SR = np.asarray(row_indices, dtype=np.int64)
    Ad = src.materialize()
    C, R = Ad[:, SC], Ad[SR]
    return CurFactors(C=C, U=optimal_core(Ad, C, R), R=R, col_indices=SC,
                      row_indices=SR, entries_visited=src.entries_evaluated)


def _leverage_draw(M, p, rng):
    """``p`` row indices of ``M`` drawn with replacement by row leverage."""
    U = condensed_svd(M).U
    lev = np.einsum("ij,ij->i", U, U)
    return rng.choice(M.shape[0], size=p, replace=True, p=lev / lev.sum())


def cur_faster(A, c, r, p_c=None, p_r=None, seed=0, sampler="uniform", rcond=None):
    """CUR whose core is fitted on a ``p_c x p_r`` block of ``A`` only.

    ``A`` may be a dense matrix or a lazily evaluated entry source such as a
    :class:`~randnla.spsd.KernelView`; then only ``m c + n r + |P_C| |P_R|``
    entries are computed.  The secondary row set ``P_C`` always contains the
    selected rows and ``P_R`` the selected columns.  ``sampler`` picks
    ``P_C``/``P_R`` uniformly or by the leverage scores of ``C`` and ``R``.
    ``p_c``/``p_r`` default to ``2 (c + r)``; uniform draws are capped at the
    matrix dimensions.  ``rcond`` is the relative singular value cut-off of
    the two pseudo-inverses (default: numerical rank).
    """
    if sampler not in ("uniform", "leverage"):
        raise ValueError(f"unknown sampler {sampler!r}")
    src = as_entry_source(A)
    m, n = src.shape
    p_c = default_secondary_size(c, r) if p_c is None else p_c
    p_r = default_secondary_size(c, r) if p_r is None else p_r
    if p_c < 1 or p_r < 1:
        raise DimensionError("secondary sizes must be >= 1")
    rng = _rng(seed)
    SC, SR = _selections(m, n, c, r, rng)
    C = src.block(None, SC)
    R = src.block(SR, None)
    if sampler == "uniform":
        PC = rng.choice(m, size=min(p_c, m), replace=False)
        PR = rng.choice(n, size=min(p_r, n), replace=False)
    else:
        PC = _leverage_draw(C, p_c, rng)
        PR = _leverage_draw(R.T, p_r, rng)
    PC = np.union1d(PC, SR)
    PR = np.union1d(PR, SC)
    Cp, f1 = pinv_flagged(C[PC], "sampled rows of C", rcond)
    Rp, f2 = pinv_flagged(R[:, PR], "sampled columns of R", rcond)
    U = Cp @ src.block(PC, PR) @ Rp
    return CurFactors(C=C, U=U, R=R, col_indices=SC, row_indices=SR,
                      secondary_rows=PC, secondary_cols=PR,
                      entries_visited=src.entries_evaluated, flagged=f1 or f2)


def cur_faster_kernel(Xtest, Xtrain, sigma, c, r, seed=0, p_c=None, p_r=None,
                      sampler="uniform", rcond=None):
    """:func:`cur_faster` on the implicit kernel ``K_ij = k(xtest_i, xtrain_j)``."""
    view = KernelView(Xtest, KernelSpec(float(sigma)), columns=Xtrain)
    return cur_faster(view, c, r, p_c=p_c, p_r=p_r, seed=seed, sampler=sampler, rcond=rcond)
