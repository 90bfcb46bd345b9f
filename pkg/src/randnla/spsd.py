"""Approximation of symmetric positive semidefinite matrices, kernels in particular.

Kernel matrices are usually accessed through a :class:`KernelView`, which
evaluates only the entries an algorithm asks for and counts them.
"""

from dataclasses import dataclass
import threading

import numpy as np
import scipy.linalg

from . import _kernels
from .linalg import (
    DegenerateInputError,
    DimensionError,
    as_matrix,
    full_svd,
    pinv_flagged,
    rank_tolerance,
    thin_qr,
)
from .sketch import SketchSpec, _rng, apply_sketch

__all__ = [
    "KernelSpec",
    "KernelView",
    "SpsdSketch",
    "NystromFactor",
    "rbf_kernel",
    "as_entry_source",
    "best_core",
    "spsd_prototype",
    "spsd_faster",
    "nystrom",
    "smw_solve",
    "shifted_smw_solve",
    "approx_eig",
]

EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class KernelSpec:
    sigma: float
    kind: str = "rbf"

    def __post_init__(self):
        if self.kind != "rbf":
            raise ValueError(f"unsupported kernel kind {self.kind!r}")
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def rbf_kernel(X1, X2, sigma):
    """``K_ij = exp(-|x_i - y_j|^2 / (2 sigma^2))`` for rows ``x_i`` of X1, ``y_j`` of X2.

    Each entry is computed from its own pair of rows in a fixed order, so a
    sub-block of the kernel is bit-identical to the same entries of the full
    matrix.
    """
    KernelSpec(float(sigma))
    X1 = as_matrix(X1, "X1")
    X2 = as_matrix(X2, "X2")
    if X1.shape[1] != X2.shape[1]:
        raise DimensionError(f"point dimensions differ: {X1.shape[1]} vs {X2.shape[1]}")
    return _kernels.rbf_block(X1, X2, float(sigma))


class _Counted:
    """Thread-safe entry counter shared by the entry sources below."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries = 0

    @property
    def entries_evaluated(self):
        return self._entries

    def _count(self, n):
        with self._lock:
            self._entries += int(n)

    def _index(self, idx, size):
        if idx is None:
            return np.arange(size)
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= size):
            raise IndexError(f"index out of range for dimension {size}")
        return idx

    def block(self, rows=None, cols=None):
        """Entries ``K[rows][:, cols]``; ``None`` selects everything."""
        r = self._index(rows, self.shape[0])
        c = self._index(cols, self.shape[1])
        self._count(r.size * c.size)
        return self._evaluate(r, c)

    def entry(self, i, j):
        return float(self.block([i], [j])[0, 0])

    def materialize(self):
        return self.block()


class KernelView(_Counted):
    """Lazily evaluated kernel ``K_ij = k(x_i, y_j)``.

    ``points`` supplies the rows; ``columns`` (default: the same points)
    supplies the columns.  Only requested entries are ever computed.
    """

    def __init__(self, points, spec, columns=None):
        super().__init__()
        if not isinstance(spec, KernelSpec):
            spec = KernelSpec(float(spec))
        self.spec = spec
        self.points = as_matrix(points, "points")
        self.columns = self.points if columns is None else as_matrix(columns, "columns")
        if self.columns.shape[1] != self.points.shape[1]:
            raise DimensionError("row and column points have different dimensions")
        self.shape = (self.points.shape[0], self.columns.shape[0])

    def _evaluate(self, r, c):
        return _kernels.rbf_block(self.points[r], self.columns[c], self.spec.sigma)


class _DenseEntries(_Counted):
    def __init__(self, K):
        super().__init__()
        self._K = as_matrix(K, "K")
        self.shape = self._K.shape

    def _evaluate(self, r, c):
        return np.array(self._K[np.ix_(r, c)])


def as_entry_source(K):
    """Wrap a dense matrix so that it exposes the counted ``block`` interface."""
    return K if isinstance(K, _Counted) else _DenseEntries(K)


def _square(K):
    src = as_entry_source(K)
    if src.shape[0] != src.shape[1]:
        raise DimensionError(f"expected a square matrix, got {src.shape}")
    return src


@dataclass(frozen=True)
class SpsdSketch:
    """``K ~ Q Z Q^T`` with orthonormal ``Q`` (``n x s``) and symmetric ``Z``."""

    Q: np.ndarray
    Z: np.ndarray
    sampler: str
    selected: np.ndarray = None
    secondary: np.ndarray = None
    flagged: bool = False
    entries_evaluated: int = 0

    def reconstruct(self):
        return self.Q @ self.Z @ self.Q.T


@dataclass(frozen=True)
class NystromFactor:
    """``K ~ L L^T``."""

    L: np.ndarray
    selected: np.ndarray
    k: int
    entries_evaluated: int = 0

    def reconstruct(self):
        return self.L @ self.L.T


def _sym(Z):
    return (Z + Z.T) / 2.0


def best_core(K, Q):
    """``Q^T K Q``, the Frobenius-optimal core for a fixed orthonormal ``Q``."""
    K = as_matrix(K, "K")
    return _sym(Q.T @ K @ Q)


def spsd_prototype(K, s, seed=0, spec=None):
    """``C = K S``, ``Q = orth(C)`` and ``Z = Q^T K Q``.

    Every entry of ``K`` is read.  ``spec`` defaults to a count sketch of
    size ``s``.
    """
    src = _square(K)
    n = src.shape[0]
    if not 1 <= s <= n:
        raise DimensionError(f"need 1 <= s={s} <= n={n}")
    if spec is None:
        spec = SketchSpec("count_sketch", s, seed)
    Kd = src.materialize()
    C = apply_sketch(Kd, spec)
    Q = thin_qr(C).Q
    return SpsdSketch(Q=Q, Z=best_core(Kd, Q), sampler=spec.kind,
                      entries_evaluated=src.entries_evaluated)


def spsd_faster(K, s, p=None, seed=0, secondary=None):
    """Sketch ``K`` from ``n s + |P|^2`` of its entries.

    ``s`` columns are picked uniformly and orthonormalized to ``Q``.  Then
    ``p`` rows are drawn with replacement by the leverage scores of ``Q``,
    merged with the first selection, and ``Z`` solves the least squares
    problem restricted to that row and column subset.  ``secondary``
    overrides the second draw with explicit indices.
    """
    src = _square(K)
    n = src.shape[0]
    p = 4 * s if p is None else p
    if not 1 <= s <= n:
        raise DimensionError(f"need 1 <= s={s} <= n={n}")
    if p < s:
        raise DimensionError(f"need p={p} >= s={s}")
    rng = _rng(seed)
    S = np.sort(rng.choice(n, size=s, replace=False))
    Q = thin_qr(src.block(None, S)).Q
    if secondary is None:
        q = np.einsum("ij,ij->i", Q, Q)
        P = rng.choice(n, size=p, replace=True, p=q / q.sum())
        P = np.union1d(P, S)
    else:
        P = np.unique(np.asarray(secondary, dtype=np.int64))
    PQ, flagged = pinv_flagged(Q[P], "sampled rows of Q_C")
    Z = _sym(PQ @ src.block(P, P) @ PQ.T)
    return SpsdSketch(Q=Q, Z=Z, sampler="uniform+leverage", selected=S,
                      secondary=P, flagged=flagged,
                      entries_evaluated=src.entries_evaluated)


def nystrom(K, s, k=None, seed=0, selected=None):
    """Nystrom factor ``L`` with ``L L^T = C W_k^+ C^T``.

    ``s`` columns are selected uniformly (or given by ``selected``);
    ``W`` is their intersection block and only its top ``k`` eigenpairs
    are inverted, ``k`` defaulting to ``ceil(0.8 s)``.  Eigenvalues at or
    below ``n * eps * lambda_max`` are dropped as well.
    """
    src = _square(K)
    n = src.shape[0]
    if selected is None:
        if not 1 <= s <= n:
            raise DimensionError(f"need 1 <= s={s} <= n={n}")
        S = np.sort(_rng(seed).choice(n, size=s, replace=False))
    else:
        S = np.unique(np.asarray(selected, dtype=np.int64))
        s = S.size
    k = int(np.ceil(0.8 * s)) if k is None else k
    if not 1 <= k <= s:
        raise DimensionError(f"need 1 <= k={k} <= s={s}")
    C = src.block(None, S)
    W = _sym(C[S])
    lam, U = scipy.linalg.eigh(W)
    lam, U = lam[::-1], U[:, ::-1]
    if lam[0] <= 0:
        raise DegenerateInputError("intersection block has no positive eigenvalue")
    keep = min(k, int(np.count_nonzero(lam > n * EPS * lam[0])))
    L = C @ (U[:, :keep] / np.sqrt(lam[:keep]))
    return NystromFactor(L=L, selected=S, k=keep, entries_evaluated=src.entries_evaluated)


def _check_alpha(alpha):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")


def smw_solve(L, alpha, y):
    """``(L L^T + alpha I)^{-1} y`` through an ``l x l`` Cholesky solve."""
    _check_alpha(alpha)
    L = as_matrix(L, "L")
    y = np.asarray(y, dtype=np.float64)
    if y.shape[0] != L.shape[0]:
        raise DimensionError(f"y has {y.shape[0]} rows, L has {L.shape[0]}")
    inner = alpha * np.eye(L.shape[1]) + L.T @ L
    t = scipy.linalg.cho_solve(scipy.linalg.cho_factor(inner), L.T @ y)
    return (y - L @ t) / alpha


def shifted_smw_solve(Q, Z, alpha, y):
    """``(Q Z Q^T + alpha I)^{-1} y`` for a symmetric, possibly indefinite ``Z``.

    Uses ``alpha^{-1} (y - Q (alpha I + Z Q^T Q)^{-1} Z Q^T y)``, which needs
    no inverse of ``Z`` itself.
    """
    _check_alpha(alpha)
    Q = as_matrix(Q, "Q")
    Z = as_matrix(Z, "Z")
    y = np.asarray(y, dtype=np.float64)
    s = Q.shape[1]
    if Z.shape != (s, s):
        raise DimensionError(f"Z must be {s}x{s}, got {Z.shape}")
    if y.shape[0] != Q.shape[0]:
        raise DimensionError(f"y has {y.shape[0]} rows, Q has {Q.shape[0]}")
    inner = alpha * np.eye(s) + Z @ (Q.T @ Q)
    sv = scipy.linalg.svdvals(inner)
    if sv[-1] <= s * EPS * sv[0]:
        raise DegenerateInputError("Q Z Q^T + alpha I is numerically singular")
    t = scipy.linalg.solve(inner, Z @ (Q.T @ y))
    return (y - Q @ t) / alpha


def approx_eig(L, k):
    """Top ``k`` eigenpairs of ``L L^T`` from the SVD of ``L``."""
    L = as_matrix(L, "L")
    F = full_svd(L)
    rho = int(np.count_nonzero(F.s > rank_tolerance(F.s, L.shape)))
    if not 1 <= k <= rho:
        raise DimensionError(f"k={k} must lie in [1, rank(L)={rho}]")
    return F.U[:, :k], F.s[:k] ** 2
