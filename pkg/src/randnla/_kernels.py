"""Hot inner loops, each with a numba kernel and a pure-numpy twin.

The numba path is used when numba imports and ``RANDNLA_DISABLE_NUMBA`` is
unset (or ``0``).  Both paths compute the same quantities; the numpy path is
the reference the tests compare against.
"""

import os
import types

import numpy as np
import scipy.sparse as sp

__all__ = [
    "BACKEND",
    "count_sketch_cols",
    "count_sketch_rows",
    "fwht_rows",
    "nearest_centroid",
    "numba_impl",
    "numpy_impl",
    "rbf_block",
]


def _numba_requested():
    flag = os.environ.get("RANDNLA_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


# ------------------------------------------------------------------ numpy path

def _fwht_rows_np(X):
    """Unnormalized Walsh-Hadamard transform of every row, natural order."""
    X = np.array(X, dtype=np.float64, order="C", copy=True)
    m, N = X.shape
    h = 1
    while h < N:
        Y = X.reshape(m, N // (2 * h), 2, h)
        a = Y[:, :, 0, :].copy()
        b = Y[:, :, 1, :]
        Y[:, :, 0, :] += b
        Y[:, :, 1, :] = a - b
        h *= 2
    return X


def _sign_matrix(buckets, signs, s):
    n = buckets.shape[0]
    return sp.csr_matrix(
        (signs.astype(np.float64), (np.arange(n), buckets)), shape=(n, s))


def _count_sketch_cols_np(A, buckets, signs, s):
    # C = A S with S having one signed unit entry per row
    S = _sign_matrix(buckets, signs, s)
    return np.asarray((S.T @ np.asarray(A).T).T, dtype=np.float64)


def _count_sketch_rows_np(A, buckets, signs, s):
    S = _sign_matrix(buckets, signs, s)
    return np.asarray(S.T @ np.asarray(A), dtype=np.float64)


def _rbf_block_np(X1, X2, sigma):
    X1 = np.ascontiguousarray(X1, dtype=np.float64)
    X2 = np.ascontiguousarray(X2, dtype=np.float64)
    # einsum without optimize never dispatches to BLAS, so every entry is
    # reduced in the same order regardless of block shape; the half norms
    # are added first so that K_ij and K_ji round identically
    half1 = np.einsum("ij,ij->i", X1, X1) / 2.0
    half2 = np.einsum("ij,ij->i", X2, X2) / 2.0
    G = np.einsum("ik,jk->ij", X1, X2)
    G -= half1[:, None] + half2[None, :]
    G /= sigma * sigma
    np.minimum(G, 0.0, out=G)
    return np.exp(G)


def _nearest_centroid_np(points, centroids):
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    chunk = max(1, 2_000_000 // max(1, centroids.size))
    for start in range(0, n, chunk):
        block = points[start:start + chunk]
        diff = block[:, None, :] - centroids[None, :, :]
        d2 = np.einsum("ikj,ikj->ik", diff, diff)
        lab = np.argmin(d2, axis=1)
        labels[start:start + chunk] = lab
        dists[start:start + chunk] = d2[np.arange(block.shape[0]), lab]
    return labels, dists


numpy_impl = types.SimpleNamespace(
    fwht_rows=_fwht_rows_np,
    count_sketch_cols=_count_sketch_cols_np,
    count_sketch_rows=_count_sketch_rows_np,
    rbf_block=_rbf_block_np,
    nearest_centroid=_nearest_centroid_np,
)


# ------------------------------------------------------------------ numba path

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def fwht_inplace(X):
        m, N = X.shape
        for r in range(m):
            h = 1
            while h < N:
                for start in range(0, N, 2 * h):
                    for j in range(start, start + h):
                        a = X[r, j]
                        b = X[r, j + h]
                        X[r, j] = a + b
                        X[r, j + h] = a - b
                h *= 2

    def fwht_rows(X):
        X = np.array(X, dtype=np.float64, order="C", copy=True)
        fwht_inplace(X)
        return X

    @njit(cache=True)
    def cs_cols(A, buckets, signs, s):
        m, n = A.shape
        C = np.zeros((m, s))
        for j in range(n):
            b = buckets[j]
            g = signs[j]
            for i in range(m):
                C[i, b] += g * A[i, j]
        return C

    @njit(cache=True)
    def cs_rows(A, buckets, signs, s):
        m, n = A.shape
        C = np.zeros((s, n))
        for i in range(m):
            b = buckets[i]
            g = signs[i]
            for j in range(n):
                C[b, j] += g * A[i, j]
        return C

    def count_sketch_cols(A, buckets, signs, s):
        return cs_cols(np.ascontiguousarray(A, dtype=np.float64),
                       buckets.astype(np.int64), signs.astype(np.float64), s)

    def count_sketch_rows(A, buckets, signs, s):
        return cs_rows(np.ascontiguousarray(A, dtype=np.float64),
                       buckets.astype(np.int64), signs.astype(np.float64), s)

    @njit(cache=True)
    def rbf_kernel_loop(X1, X2, sigma):
        n1, d = X1.shape
        n2 = X2.shape[0]
        half1 = np.empty(n1)
        half2 = np.empty(n2)
        for i in range(n1):
            acc = 0.0
            for k in range(d):
                acc += X1[i, k] * X1[i, k]
            half1[i] = acc / 2.0
        for j in range(n2):
            acc = 0.0
            for k in range(d):
                acc += X2[j, k] * X2[j, k]
            half2[j] = acc / 2.0
        s2 = sigma * sigma
        K = np.empty((n1, n2))
        for i in range(n1):
            for j in range(n2):
                acc = 0.0
                for k in range(d):
                    acc += X1[i, k] * X2[j, k]
                g = (acc - (half1[i] + half2[j])) / s2
                if g > 0.0:
                    g = 0.0
                K[i, j] = np.exp(g)
        return K

    def rbf_block(X1, X2, sigma):
        return rbf_kernel_loop(np.ascontiguousarray(X1, dtype=np.float64),
                               np.ascontiguousarray(X2, dtype=np.float64),
                               float(sigma))

    @njit(cache=True)
    def nearest_loop(points, centroids):
        n, d = points.shape
        k = centroids.shape[0]
        labels = np.empty(n, dtype=np.int64)
        dists = np.empty(n)
        for i in range(n):
            best = np.inf
            arg = 0
            for c in range(k):
                acc = 0.0
                for t in range(d):
                    diff = points[i, t] - centroids[c, t]
                    acc += diff * diff
                if acc < best:
                    best = acc
                    arg = c
            labels[i] = arg
            dists[i] = best
        return labels, dists

    def nearest_centroid(points, centroids):
        return nearest_loop(np.ascontiguousarray(points, dtype=np.float64),
                            np.ascontiguousarray(centroids, dtype=np.float64))

    return types.SimpleNamespace(
        fwht_rows=fwht_rows,
        count_sketch_cols=count_sketch_cols,
        count_sketch_rows=count_sketch_rows,
        rbf_block=rbf_block,
        nearest_centroid=nearest_centroid,
    )


numba_impl = None
try:
    numba_impl = _build_numba()
except ImportError:  # pragma: no cover - numba is optional
    pass

if numba_impl is not None and _numba_requested():
    BACKEND = "numba"
    _active = numba_impl
else:
    BACKEND = "numpy"
    _active = numpy_impl

fwht_rows = _active.fwht_rows
count_sketch_cols = _active.count_sketch_cols
count_sketch_rows = _active.count_sketch_rows
rbf_block = _active.rbf_block
nearest_centroid = _active.nearest_centroid
