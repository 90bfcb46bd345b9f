"""Deterministic dense linear algebra the randomized routines build on.

Matrices are plain ``float64`` numpy arrays.  :func:`as_matrix` is the single
validation point: it rejects non-2D input and non-finite entries and hands
back a read-only view so that callers cannot mutate shared operands.
"""

from dataclasses import dataclass
import threading
import warnings

import numpy as np
import scipy.linalg

__all__ = [
    "DimensionError",
    "ZeroRankError",
    "DegenerateInputError",
    "RankDeficientWarning",
    "QrFactors",
    "SvdFactors",
    "PassCountingMatrix",
    "as_matrix",
    "as_vector",
    "thin_qr",
    "condensed_svd",
    "full_svd",
    "truncated_svd",
    "pseudo_inverse",
    "norms",
    "rank_tolerance",
    "orth_basis",
    "pinv_flagged",
]

EPS = np.finfo(np.float64).eps


class DimensionError(ValueError):
    """Operand shapes or size parameters are incompatible."""


class ZeroRankError(ValueError):
    """The input has numerical rank zero."""


class DegenerateInputError(ValueError):
    """A ratio or normalisation is undefined for this input."""


class RankDeficientWarning(UserWarning):
    """A sketched system was rank deficient and was solved by pseudo-inverse."""


def as_matrix(A, name="A"):
    """Validate ``A`` as a finite 2-D float64 array and return a read-only view."""
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    M = M.view()
    M.flags.writeable = False
    return M


def as_vector(b, name="b"):
    v = np.asarray(b, dtype=np.float64)
    if v.ndim == 2 and 1 in v.shape:
        v = v.reshape(-1)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return v


@dataclass(frozen=True)
class QrFactors:
    Q: np.ndarray
    R: np.ndarray


@dataclass(frozen=True)
class SvdFactors:
    """Condensed SVD ``A = U diag(s) V^T`` with ``s`` strictly positive."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return self.s.shape[0]

    def reconstruct(self):
        return (self.U * self.s) @ self.V.T


class PassCountingMatrix:
    """Read-only matrix view that counts passes over its entries.

    Every method that touches all entries of the matrix (a product, a
    streamed sweep over column or row blocks) counts as one pass.  Column
    reads are tallied separately so single-pass streaming can be asserted.
    """

    def __init__(self, A):
        self._A = as_matrix(A)
        self._lock = threading.Lock()
        self.passes = 0
        self.columns_read = 0
        self.rows_read = 0

    @property
    def shape(self):
        return self._A.shape

    def _bump(self, cols=0, rows=0, passes=0):
        with self._lock:
            self.passes += passes
            self.columns_read += cols
            self.rows_read += rows

    def matmul(self, X):
        """Return ``A @ X``."""
        self._bump(passes=1)
        return self._A @ X

    def rmatmul(self, X):
        """Return ``X @ A``."""
        self._bump(passes=1)
        return X @ self._A

    def iter_column_blocks(self, block=256):
        self._bump(passes=1)
        n = self._A.shape[1]
        for start in range(0, n, block):
            stop = min(n, start + block)
            self._bump(cols=stop - start)
            yield start, self._A[:, start:stop]

    def iter_row_blocks(self, block=256):
        self._bump(passes=1)
        m = self._A.shape[0]
        for start in range(0, m, block):
            stop = min(m, start + block)
            self._bump(rows=stop - start)
            yield start, self._A[start:stop, :]

    def materialize(self):
        """Full dense copy; counts as a pass."""
        self._bump(passes=1)
        return np.array(self._A)


def _fix_signs(Q, other=None, other_axis=1):
    """Make the first nonzero entry of every column of ``Q`` nonnegative.

    ``other`` receives the matching sign flip: rows of R (``other_axis=0``)
    or columns of V (``other_axis=1``).
    """
    if Q.shape[1] == 0:
        return Q, other
    nz = np.abs(Q) > 0
    first = np.argmax(nz, axis=0)
    lead = Q[first, np.arange(Q.shape[1])]
    flip = np.where(lead < 0, -1.0, 1.0)
    Q = Q * flip
    if other is not None:
        other = other * (flip[:, None] if other_axis == 0 else flip)
    return Q, other


def thin_qr(A):
    """Economy QR of a tall matrix with the column sign convention applied."""
    A = as_matrix(A)
    m, n = A.shape
    if m < n:
        raise DimensionError(f"thin_qr needs rows >= cols, got {m}x{n}")
    Q, R = scipy.linalg.qr(A, mode="economic")
    Q, R = _fix_signs(Q, R, other_axis=0)
    return QrFactors(Q=Q, R=np.triu(R))


def orth_basis(C):
    """Orthonormal basis of ``range(C)`` for any shape, via QR when tall."""
    C = np.asarray(C, dtype=np.float64)
    if C.shape[0] >= C.shape[1]:
        return thin_qr(C).Q
    return condensed_svd(C).U


def rank_tolerance(s, shape):
    """Cut-off below which singular values count as zero."""
    if s.size == 0:
        return 0.0
    return max(shape) * EPS * s[0]


def full_svd(A):
    """Economy SVD keeping every singular value, zeros included."""
    A = as_matrix(A)
    try:
        U, s, Vt = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        U, s, Vt = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
    U, V = _fix_signs(U, Vt.T, other_axis=1)
    return SvdFactors(U=U, s=s, V=V)


def condensed_svd(A):
    """SVD restricted to the numerical rank of ``A``."""
    A = as_matrix(A)
    F = full_svd(A)
    rho = int(np.count_nonzero(F.s > rank_tolerance(F.s, A.shape)))
    if rho == 0:
        raise ZeroRankError("matrix has numerical rank zero")
    return SvdFactors(U=F.U[:, :rho], s=F.s[:rho], V=F.V[:, :rho])


def truncated_svd(A, k):
    """Top-``k`` singular triplets: the best rank-``k`` approximation."""
    A = as_matrix(A)
    if not 1 <= k <= min(A.shape):
        raise DimensionError(f"k={k} outside [1, {min(A.shape)}]")
    F = full_svd(A)
    return SvdFactors(U=F.U[:, :k], s=F.s[:k], V=F.V[:, :k])


def pseudo_inverse(A, tol=None):
    """Moore-Penrose inverse; singular values below ``tol * s_max`` are dropped.

    The default ``tol`` is the numerical-rank threshold ``max(m, n) * eps``.
    Singular values whose reciprocals would overflow are also treated as zero.
    """
    A = as_matrix(A)
    m, n = A.shape
    if A.size == 0:
        return np.zeros((n, m))
    F = full_svd(A)
    if F.s.size == 0 or F.s[0] == 0.0:
        return np.zeros((n, m))
    cut = (max(m, n) * EPS if tol is None else tol) * F.s[0]
    keep = F.s > max(cut, min(m, n) * np.finfo(np.float64).tiny)
    return (F.V[:, keep] / F.s[keep]) @ F.U[:, keep].T


def norms(A):
    """Return ``(frobenius, spectral)``."""
    A = as_matrix(A)
    if A.size == 0:
        return 0.0, 0.0
    amax = float(np.max(np.abs(A)))
    # scaled by the largest entry so squaring cannot underflow or overflow
    fro = amax * float(np.linalg.norm(A / amax, "fro")) if amax > 0 else 0.0
    spec = float(scipy.linalg.svdvals(A)[0]) if fro > 0 else 0.0
    return fro, spec


def pinv_flagged(A, name="matrix", tol=None):
    """Pseudo-inverse plus a warning when ``A`` is numerically rank deficient.

    ``tol`` is a relative cut-off as in :func:`pseudo_inverse`.  Returns
    ``(A_pinv, flagged)``.
    """
    A = as_matrix(A, name)
    F = full_svd(A)
    cut = rank_tolerance(F.s, A.shape) if tol is None or F.s.size == 0 else tol * F.s[0]
    cut = max(cut, min(A.shape) * np.finfo(np.float64).tiny)
    rho = int(np.count_nonzero(F.s > cut))
    flagged = rho < min(A.shape)
    if flagged:
        warnings.warn(
            f"{name} of shape {A.shape} has numerical rank {rho}; "
            "solved by pseudo-inverse",
            RankDeficientWarning, stacklevel=3)
    if rho == 0:
        return np.zeros(A.shape[::-1]), flagged
    return (F.V[:, :rho] / F.s[:rho]) @ F.U[:, :rho].T, flagged
