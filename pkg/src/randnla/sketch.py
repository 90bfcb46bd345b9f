"""Sketching operators ``C = A S`` and empirical checks of sketch quality.

Every operator is a deterministic function of ``(A, size, seed)``.  Random
projections (Gaussian, SRHT, count sketch and their combination) and column
selections (uniform, leverage score, landmark) share the :class:`SketchSpec`
description so that solvers can take the sketch as a parameter.

Projections act on columns: an ``m x n`` input yields an ``m x s`` sketch.
:func:`sketch_rows` applies the same operator to rows, ``S^T A``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _cluster, _kernels
from .linalg import (
    DegenerateInputError,
    DimensionError,
    PassCountingMatrix,
    ZeroRankError,
    as_matrix,
    condensed_svd,
    full_svd,
    truncated_svd,
)

__all__ = [
    "KINDS",
    "SketchSpec",
    "ColumnSelection",
    "hash_streams",
    "gaussian_sketch",
    "srht_sketch",
    "count_sketch",
    "count_sketch_matrix",
    "combined_sketch",
    "uniform_sample_columns",
    "leverage_scores",
    "leverage_sample_columns",
    "landmark_select",
    "apply_sketch",
    "sketch_rows",
    "estimate_gamma",
    "estimate_eta",
]

KINDS = (
    "gaussian",
    "srht",
    "count_sketch",
    "uniform_columns",
    "leverage_columns",
    "landmark_columns",
    "combined",
)
_SELECTIONS = ("uniform_columns", "leverage_columns", "landmark_columns")


@dataclass(frozen=True)
class SketchSpec:
    """Declarative sketching operator.

    For ``kind="combined"`` the operator is a count sketch to ``s`` columns
    followed by ``stage2`` (Gaussian or SRHT) down to ``stage2.s``.
    """

    kind: str
    s: int
    seed: int = 0
    stage2: Optional["SketchSpec"] = None
    scale_columns: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sketch kind {self.kind!r}")
        if self.s < 1:
            raise DimensionError("sketch size must be >= 1")
        if self.kind == "combined":
            if self.stage2 is None or self.stage2.kind not in ("gaussian", "srht"):
                raise ValueError("combined sketch needs a gaussian or srht stage2")
            if self.stage2.s > self.s:
                raise DimensionError(
                    f"stage2 size {self.stage2.s} exceeds count-sketch size {self.s}")
        elif self.stage2 is not None:
            raise ValueError("stage2 is only meaningful for combined sketches")
        if self.scale_columns and self.kind not in _SELECTIONS:
            raise ValueError("scale_columns applies to column selections only")

    @property
    def output_size(self):
        return self.stage2.s if self.kind == "combined" else self.s


@dataclass(frozen=True)
class ColumnSelection:
    """Sorted distinct column indices, with optional per-column scale factors."""

    indices: np.ndarray
    weights: Optional[np.ndarray] = None
    requested: int = 0

    def __post_init__(self):
        idx = self.indices
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("selection indices must be strictly increasing")
        if self.weights is not None:
            if self.weights.shape != idx.shape or np.any(self.weights <= 0):
                raise ValueError("weights must be positive and aligned with indices")

    @property
    def size(self):
        return int(self.indices.size)


def _rng(seed):
    return np.random.default_rng(seed)


# ------------------------------------------------------------------ hashing

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash_streams(seed, index, s):
    """Bucket in ``[0, s)`` and sign in ``{+1, -1}`` for each position in ``index``.

    The pair for position ``j`` depends only on ``(seed, j)``, so a streamed
    sweep in any order or block size draws the same operator.
    """
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = _splitmix64(np.array([np.uint64(seed & (2**64 - 1))]))[0]
        h = _splitmix64(key + idx * _GOLDEN)
        buckets = ((h >> np.uint64(32)) * np.uint64(s)) >> np.uint64(32)
    signs = np.where((h & np.uint64(1)) == 0, 1.0, -1.0)
    return buckets.astype(np.int64), signs


def count_sketch_matrix(n, s, seed):
    """Materialize the ``n x s`` count-sketch matrix (small ``n`` only)."""
    b, g = hash_streams(seed, np.arange(n), s)
    return sp.csr_matrix((g, (np.arange(n), b)), shape=(n, s)).toarray()


# ------------------------------------------------------------------ projections

def gaussian_sketch(A, s, seed):
    """``C = A G / sqrt(s)`` with ``G`` standard normal, ``n x s``."""
    if s < 1:
        raise DimensionError("s must be >= 1")
    if isinstance(A, PassCountingMatrix):
        G = _rng(seed).standard_normal((A.shape[1], s))
        return A.matmul(G) / np.sqrt(s)
    A = _as_operand(A)
    G = _rng(seed).standard_normal((A.shape[1], s))
    return np.asarray(A @ G) / np.sqrt(s)


def _srht_draw(n, s, seed):
    N = 1 << max(0, (n - 1).bit_length())
    if s > N:
        raise DimensionError(f"SRHT size s={s} exceeds padded length N={N}")
    rng = _rng(seed)
    signs = rng.integers(0, 2, size=n) * 2.0 - 1.0
    cols = np.sort(rng.choice(N, size=s, replace=False))
    return N, signs, cols


def _srht_block(block, N, signs, cols, s):
    m, n = block.shape
    padded = np.zeros((m, N))
    padded[:, :n] = block * signs
    return _kernels.fwht_rows(padded)[:, cols] / np.sqrt(s)


def srht_sketch(A, s, seed):
    """Subsampled randomized Hadamard transform ``C = A D H_N P / sqrt(s)``.

    Columns are zero-padded to ``N``, the next power of two.  ``D`` holds
    random signs, ``H_N`` is the unnormalized Hadamard matrix and ``P``
    keeps ``s`` of the ``N`` transformed columns.
    """
    if isinstance(A, PassCountingMatrix):
        m, n = A.shape
        N, signs, cols = _srht_draw(n, s, seed)
        C = np.empty((m, s))
        for start, block in A.iter_row_blocks():
            C[start:start + block.shape[0]] = _srht_block(block, N, signs, cols, s)
        return C
    A = _dense(A)
    N, signs, cols = _srht_draw(A.shape[1], s, seed)
    return _srht_block(A, N, signs, cols, s)


def count_sketch(A, s, seed, block=256):
    """Single-pass count sketch: each column is added, with a random sign,
    to one uniformly chosen column of the ``m x s`` output.

    ``A`` may be a dense array, a scipy sparse matrix (cost ``O(nnz)``) or a
    :class:`PassCountingMatrix`, which is streamed block by block.
    """
    if s < 1:
        raise DimensionError("s must be >= 1")
    if isinstance(A, PassCountingMatrix):
        m, n = A.shape
        C = np.zeros((m, s))
        for start, cols in A.iter_column_blocks(block):
            b, g = hash_streams(seed, np.arange(start, start + cols.shape[1]), s)
            C += _kernels.count_sketch_cols(cols, b, g, s)
        return C
    if sp.issparse(A):
        n = A.shape[1]
        b, g = hash_streams(seed, np.arange(n), s)
        S = sp.csr_matrix((g, (np.arange(n), b)), shape=(n, s))
        return np.asarray((sp.csr_matrix(A) @ S).toarray())
    A = _dense(A)
    b, g = hash_streams(seed, np.arange(A.shape[1]), s)
    return _kernels.count_sketch_cols(A, b, g, s)


def _count_sketch_rows(A, s, seed, block=256):
    if _row_streamed(A):
        m, n = A.shape
        C = np.zeros((s, n))
        for start, rows in A.iter_row_blocks(block):
            b, g = hash_streams(seed, np.arange(start, start + rows.shape[0]), s)
            C += _kernels.count_sketch_rows(rows, b, g, s)
        return C
    if sp.issparse(A):
        return count_sketch(sp.csr_matrix(A).T, s, seed).T
    A = _dense(A)
    b, g = hash_streams(seed, np.arange(A.shape[0]), s)
    return _kernels.count_sketch_rows(A, b, g, s)


def combined_sketch(A, spec):
    """Count sketch to ``spec.s`` columns, then a dense projection to ``spec.stage2.s``."""
    if spec.kind != "combined":
        raise ValueError("combined_sketch needs a combined SketchSpec")
    C = count_sketch(A, spec.s, spec.seed)
    return apply_sketch(C, spec.stage2)


# ------------------------------------------------------------------ selections

def uniform_sample_columns(A, s, seed, scale=False):
    """``s`` distinct columns chosen uniformly, returned in index order."""
    A = _dense(A)
    n = A.shape[1]
    if not 1 <= s <= n:
        raise DimensionError(f"cannot select s={s} of n={n} columns")
    idx = np.sort(_rng(seed).choice(n, size=s, replace=False))
    weights = np.full(s, np.sqrt(n / s)) if scale else None
    sel = ColumnSelection(indices=idx, weights=weights, requested=s)
    C = A[:, idx] if weights is None else A[:, idx] * weights
    return C, sel


def leverage_scores(A, k=None):
    """Column leverage scores: squared row norms of the right singular vectors.

    With ``k`` the scores of the best rank-``k`` approximation are returned;
    they sum to ``k`` (to the rank of ``A`` otherwise).
    """
    A = as_matrix(A)
    if k is None:
        V = condensed_svd(A).V
    else:
        F = condensed_svd(A)
        if not 1 <= k <= F.rank:
            raise DimensionError(f"k={k} exceeds rank {F.rank}")
        V = F.V[:, :k]
    return np.einsum("ij,ij->i", V, V)


def _sample_by_scores(scores, s, rng):
    p = scores / scores.sum()
    return np.unique(rng.choice(scores.size, size=s, replace=True, p=p))


def leverage_sample_columns(A, s, seed, k=None, scale=False):
    """Draw ``s`` columns with replacement, probability proportional to leverage.

    Repeated draws are merged, so the selection may hold fewer than ``s``
    columns.  With ``scale`` each kept column is multiplied by
    ``sqrt(rho / (s * l_i))``.
    """
    A = _dense(A)
    if s < 1:
        raise DimensionError("s must be >= 1")
    lev = leverage_scores(A, k)
    idx = _sample_by_scores(lev, s, _rng(seed))
    weights = None
    if scale:
        weights = np.sqrt(lev.sum() / (s * lev[idx]))
    sel = ColumnSelection(indices=idx, weights=weights, requested=s)
    C = A[:, idx] if weights is None else A[:, idx] * weights
    return C, sel


def landmark_select(A, s, iters=10, seed=0):
    """Centroids of a short k-means run over the columns of ``A`` (``m x s``).

    Initial centroids are ``s`` distinct columns chosen uniformly at random,
    kept in index order.
    """
    A = _dense(A)
    n = A.shape[1]
    if not 1 <= s <= n:
        raise DimensionError(f"cannot pick s={s} landmarks from n={n} columns")
    init = np.sort(_rng(seed).choice(n, size=s, replace=False))
    points = np.ascontiguousarray(A.T)
    _, centroids, _ = _cluster.lloyd(points, points[init], iters)
    return np.ascontiguousarray(centroids.T)


# ------------------------------------------------------------------ dispatch

def _as_operand(A):
    if sp.issparse(A) or isinstance(A, PassCountingMatrix):
        return A
    return _dense(A)


def _dense(A):
    if sp.issparse(A):
        A = A.toarray()
    elif isinstance(A, PassCountingMatrix):
        raise TypeError("operation needs an in-memory matrix, not a streamed view")
    return as_matrix(A)


def apply_sketch(A, spec):
    """Return ``A S`` for the operator described by ``spec``."""
    kind = spec.kind
    if kind == "gaussian":
        return gaussian_sketch(A, spec.s, spec.seed)
    if kind == "srht":
        return srht_sketch(A, spec.s, spec.seed)
    if kind == "count_sketch":
        return count_sketch(A, spec.s, spec.seed)
    if kind == "combined":
        return combined_sketch(A, spec)
    if kind == "uniform_columns":
        return uniform_sample_columns(A, spec.s, spec.seed, spec.scale_columns)[0]
    if kind == "leverage_columns":
        return leverage_sample_columns(A, spec.s, spec.seed, scale=spec.scale_columns)[0]
    return landmark_select(A, spec.s, seed=spec.seed)


def _row_streamed(A):
    return hasattr(A, "iter_row_blocks")


def sketch_rows(A, spec):
    """Return ``S^T A``: the operator of ``spec`` applied to the rows of ``A``.

    Count sketches (alone or as the first stage of a combined sketch) stream
    over row blocks when ``A`` provides ``iter_row_blocks``.
    """
    if spec.kind == "count_sketch":
        return _count_sketch_rows(A, spec.s, spec.seed)
    if spec.kind == "combined":
        return sketch_rows(_count_sketch_rows(A, spec.s, spec.seed), spec.stage2)
    if isinstance(A, PassCountingMatrix) and spec.kind == "gaussian":
        G = _rng(spec.seed).standard_normal((A.shape[0], spec.s))
        return A.rmatmul(G.T) / np.sqrt(spec.s)
    if _row_streamed(A):
        raise TypeError(f"{spec.kind} row sketch needs an in-memory matrix")
    return apply_sketch(_dense(A).T, spec).T


# ------------------------------------------------------------------ verifiers

def estimate_gamma(A, spec, trials=100, seed=0):
    """Worst observed distortion of squared norms over random row-space probes.

    For each random unit ``y`` the ratio ``r = |y^T A S|^2 / |y^T A|^2`` is
    formed; the estimate is the largest of ``max(r, 1/r)``.  Directions with
    ``y^T A = 0`` are skipped.
    """
    A = _dense(A)
    m, n = A.shape
    if m > n:
        raise DimensionError("estimate_gamma expects a wide matrix (m <= n)")
    C = apply_sketch(A, spec)
    Y = _rng(seed).standard_normal((m, trials))
    Y /= np.linalg.norm(Y, axis=0)
    den = np.sum((Y.T @ A) ** 2, axis=1)
    num = np.sum((Y.T @ C) ** 2, axis=1)
    live = den > (np.finfo(float).eps * np.linalg.norm(A)) ** 2
    if not np.any(live):
        raise DegenerateInputError("every probe direction is annihilated by A")
    r = num[live] / den[live]
    with np.errstate(divide="ignore"):
        return float(np.max(np.maximum(r, 1.0 / r)))


def estimate_eta(A, C, k):
    """Low-rank approximation quality of the sketch ``C``.

    Returns ``(eta_proj, eta_best)``: the residual of projecting ``A`` onto
    ``range(C)``, and of the best rank-``k`` approximation within that range,
    both relative to ``|A - A_k|_F^2``.  The rank constraint can only hurt,
    so ``eta_proj <= eta_best``.
    """
    A = as_matrix(A)
    C = as_matrix(C, "C")
    if C.shape[0] != A.shape[0]:
        raise DimensionError("C and A must have the same number of rows")
    if not 1 <= k <= C.shape[1]:
        raise DimensionError(f"k={k} must lie in [1, cols(C)={C.shape[1]}]")
    s = full_svd(A).s
    tail = float(np.sum(s[k:] ** 2))
    if tail <= (np.finfo(float).eps * s.size * s[0]) ** 2:
        raise DegenerateInputError("A has rank <= k; the error ratio is undefined")
    try:
        Q = condensed_svd(C).U
    except ZeroRankError:
        total = float(np.sum(s ** 2))
        return total / tail, total / tail
    B = Q.T @ A
    proj = A - Q @ B
    eta_proj = float(np.sum(proj ** 2)) / tail
    kk = min(k, min(B.shape))
    Bk = truncated_svd(B, kk).reconstruct()
    eta_best = float(np.sum((A - Q @ Bk) ** 2)) / tail
    return eta_proj, eta_best
