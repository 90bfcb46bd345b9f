"""Truncated SVD: block Lanczos, and the two-pass randomized k-SVD algorithms."""

from dataclasses import dataclass
import warnings

import numpy as np
import scipy.linalg

from .linalg import (
    DegenerateInputError,
    DimensionError,
    PassCountingMatrix,
    SvdFactors,
    full_svd,
    pinv_flagged,
    rank_tolerance,
    thin_qr,
)
from .sketch import SketchSpec, _rng, apply_sketch, count_sketch, sketch_rows

__all__ = [
    "KsvdResult",
    "KrylovCollapseWarning",
    "block_lanczos_ksvd",
    "prototype_ksvd",
    "faster_ksvd",
    "faster_ksvd_defaults",
]


class KrylovCollapseWarning(UserWarning):
    """The Krylov block lost rank and was truncated."""


@dataclass(frozen=True)
class KsvdResult:
    factors: SvdFactors
    passes_over_A: int
    error_fro: float = None


def _view(A):
    return A if isinstance(A, PassCountingMatrix) else PassCountingMatrix(A)


def _finish(factors, passes, A, evaluate):
    err = None
    if evaluate:
        dense = A._A if isinstance(A, PassCountingMatrix) else np.asarray(A)
        err = float(np.linalg.norm(dense - factors.reconstruct()))
    return KsvdResult(factors=factors, passes_over_A=passes, error_fro=err)


def _top_k(B, k):
    F = full_svd(B)
    k = min(k, F.s.size)
    return F.U[:, :k], F.s[:k], F.V[:, :k]


def block_lanczos_ksvd(A, k, q, seed, evaluate=False):
    """Rank-``k`` SVD from the Krylov space ``[C, (AA^T)C, ..., (AA^T)^{q-1} C]``.

    ``C = A G`` for a Gaussian ``n x 2k`` start block.  Each new block is
    orthogonalized against everything accumulated so far (twice, for
    stability) and columns that vanish are dropped, so a space that fills up
    ``R^m`` simply stops growing.
    """
    V = _view(A)
    m, n = V.shape
    s = 2 * k
    if k < 1 or q < 1:
        raise DimensionError("k and q must be >= 1")
    if s > min(m, n):
        raise DimensionError(f"block width 2k={s} exceeds min(m, n)={min(m, n)}")
    G = _rng(seed).standard_normal((n, s))
    block = V.matmul(G)
    basis = np.zeros((m, 0))
    collapsed = False
    for i in range(q):
        if i > 0:
            block = V.matmul(V.rmatmul(block.T).T)
        scale = np.linalg.norm(block, axis=0).max()
        for _ in range(2):
            block = block - basis @ (basis.T @ block)
        Qb, Rb = scipy.linalg.qr(block, mode="economic")
        keep = np.abs(np.diag(Rb)) > 1e-10 * max(scale, np.finfo(float).tiny)
        if not keep.all():
            collapsed = True
            Qb = Qb[:, keep]
        basis = np.hstack([basis, Qb])
        if basis.shape[1] >= m or Qb.shape[1] == 0:
            break
        block = Qb
    if collapsed:
        warnings.warn(f"Krylov block lost rank; basis truncated to {basis.shape[1]} columns",
                      KrylovCollapseWarning, stacklevel=2)
    Ub, sv, Vk = _top_k(V.rmatmul(basis.T), k)
    factors = SvdFactors(U=basis @ Ub, s=sv, V=Vk)
    return _finish(factors, V.passes, A, evaluate)


def prototype_ksvd(A, k, s, seed=0, spec=None, evaluate=False):
    """Two-pass randomized k-SVD: ``C = A S``, ``Q_C``, then the SVD of ``Q_C^T A``.

    ``spec`` defaults to a count sketch of size ``s``.
    """
    V = _view(A)
    m, n = V.shape
    if not 1 <= k <= s <= min(m, n):
        raise DimensionError(f"need 1 <= k={k} <= s={s} <= min(m, n)={min(m, n)}")
    if spec is None:
        spec = SketchSpec("count_sketch", s, seed)
    C = apply_sketch(V, spec)
    Q = thin_qr(C).Q
    Ub, sv, Vk = _top_k(V.rmatmul(Q.T), k)
    factors = SvdFactors(U=Q @ Ub, s=sv, V=Vk)
    return _finish(factors, V.passes, A, evaluate)


def faster_ksvd_defaults(k):
    s = 4 * k
    p = 4 * s
    return s, p, 4 * p


def faster_ksvd(A, k, s=None, p_cs=None, p=None, seed=0, evaluate=False):
    """Two-pass k-SVD with a second, sketched least squares solve.

    Pass one forms ``C = A S`` by count sketch.  Pass two sketches the rows
    of ``[A, C]`` jointly, count sketch to ``p_cs`` rows then Gaussian to
    ``p`` rows, giving ``L`` and ``D``.  With ``D = Q_D R_D`` the rank-``k``
    SVD ``U_bar S_bar V_bar^T`` of ``Q_D^T L`` yields
    ``C R_D^+ U_bar S_bar = U_tilde S_tilde V_hat^T`` and
    ``V_tilde = V_bar V_hat``.
    """
    V = _view(A)
    m, n = V.shape
    ds, dp, dpcs = faster_ksvd_defaults(k)
    s = ds if s is None else s
    p = dp if p is None else p
    p_cs = dpcs if p_cs is None else p_cs
    if not (1 <= k < s < p < p_cs):
        raise DimensionError(f"need k < s < p < p_cs, got {k}, {s}, {p}, {p_cs}")
    if p_cs > m:
        raise DimensionError(f"p_cs={p_cs} exceeds the row count m={m}")
    if s > n:
        raise DimensionError(f"s={s} exceeds the column count n={n}")
    seeds = np.random.SeedSequence(int(seed) & (2**64 - 1)).generate_state(5, np.uint64)
    C = count_sketch(V, s, int(seeds[0]))
    sv_C = scipy.linalg.svdvals(C)
    rank_C = int(np.count_nonzero(sv_C > rank_tolerance(sv_C, C.shape)))
    for attempt in range(2):
        rows = SketchSpec("combined", p_cs, int(seeds[1 + 2 * attempt]),
                          stage2=SketchSpec("gaussian", p, int(seeds[2 + 2 * attempt])))
        L = sketch_rows(_StackedView(V, C), rows)
        D = L[:, n:]
        L = L[:, :n]
        QD, RD = scipy.linalg.qr(D, mode="economic")
        sv_D = scipy.linalg.svdvals(RD)
        if np.count_nonzero(sv_D > rank_tolerance(sv_D, D.shape)) >= rank_C:
            break
        if attempt == 1:
            raise DegenerateInputError("row sketch of C lost rank twice")
    Ub, Sb, Vb = _top_k(QD.T @ L, k)
    # R_D is singular whenever rank(A) < s; the pseudo-inverse is then exact
    RDp, _ = pinv_flagged(RD, "R_D")
    F = full_svd(C @ (RDp @ (Ub * Sb)))
    kk = min(k, F.s.size)
    factors = SvdFactors(U=F.U[:, :kk], s=F.s[:kk], V=Vb @ F.V[:, :kk])
    return _finish(factors, V.passes, A, evaluate)


class _StackedView:
    """Row-streamable ``[A, C]`` whose sweeps count as passes over ``A``."""

    def __init__(self, view, C):
        self._view = view
        self._C = C
        self.shape = (view.shape[0], view.shape[1] + C.shape[1])

    def iter_row_blocks(self, block=256):
        for start, rows in self._view.iter_row_blocks(block):
            yield start, np.hstack([rows, self._C[start:start + rows.shape[0]]])
