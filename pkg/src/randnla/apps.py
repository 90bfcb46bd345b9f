"""Kernel PCA, spectral clustering and Gaussian process regression on sketched kernels.

Also the small amount of plumbing they need: k-means, k-NN and a
cluster-accuracy score.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from . import _cluster
from .cur import cur_faster_kernel
from .linalg import DegenerateInputError, DimensionError, as_matrix, as_vector
from .sketch import _rng
from .spsd import KernelSpec, KernelView, nystrom, rbf_kernel, smw_solve, spsd_faster

__all__ = [
    "Dataset",
    "KpcaModel",
    "kmeans",
    "kpca_train",
    "kpca_test",
    "spectral_cluster",
    "spectral_embedding",
    "gpr_train",
    "gpr_predict",
    "knn_classify",
    "cluster_accuracy",
    "cur_sizes",
]


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    labels: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "points", as_matrix(self.points, "points"))
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (self.points.shape[0],):
                raise DimensionError(
                    f"{labels.shape[0] if labels.ndim else 0} labels for "
                    f"{self.points.shape[0]} points")
            object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class KpcaModel:
    U: np.ndarray
    lambdas: np.ndarray
    train_features: np.ndarray
    sigma: float


def _plus_plus(points, k, rng):
    """k-means++ seeding."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.einsum("ij,ij->i", points - centers[0], points - centers[0])
    for j in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers[j] = points[idx]
        diff = points - centers[j]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return centers


def kmeans(points, k, iters=100, replicates=3, seed=0):
    """Lloyd's algorithm from ``replicates`` k-means++ starts; the lowest inertia wins.

    Returns ``(labels, centroids)``.
    """
    X = np.ascontiguousarray(as_matrix(points, "points"))
    n = X.shape[0]
    if not 1 <= k <= n:
        raise DimensionError(f"need 1 <= k={k} <= n={n}")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    streams = np.random.SeedSequence(int(seed) & (2**64 - 1)).spawn(replicates)
    best = None
    for ss in streams:
        rng = np.random.default_rng(ss)
        labels, centroids, inertia = _cluster.lloyd(X, _plus_plus(X, k, rng), iters)
        if best is None or inertia < best[2]:
            best = (labels, centroids, inertia)
    return best[0], best[1]


def _top_eig(Z, k):
    lam, V = scipy.linalg.eigh((Z + Z.T) / 2.0)
    return lam[::-1], V[:, ::-1]


def kpca_train(Xtrain, sigma, k, s=None, seed=0):
    """Kernel PCA on a fast SPSD sketch of the training kernel (``s`` defaults to ``10 k``)."""
    view = KernelView(Xtrain, KernelSpec(float(sigma)))
    n = view.shape[0]
    s = 10 * k if s is None else s
    if not 1 <= k <= s <= n:
        raise DimensionError(f"need 1 <= k={k} <= s={s} <= n={n}")
    sk = spsd_faster(view, s, seed=seed)
    lam, V = _top_eig(sk.Z, k)
    if np.count_nonzero(lam[:k] > 0) < k:
        raise DegenerateInputError(f"sketched kernel has fewer than {k} positive eigenvalues")
    U = sk.Q @ V[:, :k]
    lam = lam[:k]
    return KpcaModel(U=U, lambdas=lam, train_features=U * np.sqrt(lam), sigma=float(sigma))


CUR_RCOND = 1e-10


def cur_sizes(n_train, n_test):
    """Column and row counts for CUR-mode prediction, capped at the kernel shape."""
    c = max(100, math.ceil(n_train / 20))
    r = max(100, math.ceil(n_test / 20))
    return min(c, n_train), min(r, n_test)


def _kernel_times(Xtrain, Xtest, sigma, M, use_cur, seed):
    Xtrain = as_matrix(Xtrain, "Xtrain")
    Xtest = as_matrix(Xtest, "Xtest")
    if Xtrain.shape[1] != Xtest.shape[1]:
        raise DimensionError("train and test points have different dimensions")
    if M.shape[0] != Xtrain.shape[0]:
        raise DimensionError(f"operand has {M.shape[0]} rows, expected {Xtrain.shape[0]}")
    if not use_cur:
        return rbf_kernel(Xtest, Xtrain, sigma) @ M
    c, r = cur_sizes(Xtrain.shape[0], Xtest.shape[0])
    # smooth kernels are numerically low rank; without a cut-off the core
    # inverts noise-level singular values and C U R loses all accuracy
    f = cur_faster_kernel(Xtest, Xtrain, sigma, c, r, seed=seed, rcond=CUR_RCOND)
    return f.apply(M)


def kpca_test(Xtrain, Xtest, sigma, model, use_cur=False, seed=0):
    """Test features ``K_* U diag(lambda)^{-1/2}``, optionally through a kernel CUR."""
    return _kernel_times(Xtrain, Xtest, sigma, model.U / np.sqrt(model.lambdas),
                         use_cur, seed)


def spectral_embedding(L):
    """Row-normalized top eigenvectors of ``D^{-1/2} L L^T D^{-1/2}`` with ``D = diag(L L^T 1)``.

    Returns all left singular vectors of the scaled factor; callers keep
    the leading ``k`` columns before normalizing.
    """
    d = L @ (L.T @ np.ones(L.shape[0]))
    if np.any(d <= 0):
        raise DegenerateInputError("approximate degree vector has nonpositive entries")
    U, _, _ = scipy.linalg.svd(L / np.sqrt(d)[:, None], full_matrices=False)
    return U


def _normalize_rows(U):
    norms = np.linalg.norm(U, axis=1)
    if np.any(norms == 0):
        raise DegenerateInputError("spectral embedding has a zero row")
    return U / norms[:, None]


def spectral_cluster(X, sigma, k, method="faster", seed=0, s=None):
    """Normalized spectral clustering on a low-rank kernel factor.

    ``method`` is ``"faster"`` (fast SPSD sketch) or ``"nystrom"``.
    Returns ``(labels, embedding)``.
    """
    view = KernelView(X, KernelSpec(float(sigma)))
    n = view.shape[0]
    s = 10 * k if s is None else s
    if not 1 <= k <= min(s, n):
        raise DimensionError(f"need 1 <= k={k} <= min(s, n)")
    s = min(s, n)
    seeds = np.random.SeedSequence(int(seed) & (2**64 - 1)).generate_state(2, np.uint64)
    if method == "faster":
        sk = spsd_faster(view, s, seed=int(seeds[0]))
        lam, V = _top_eig(sk.Z, s)
        L = sk.Q @ (V * np.sqrt(np.clip(lam, 0.0, None)))
    elif method == "nystrom":
        L = nystrom(view, s, seed=int(seeds[0])).L
    else:
        raise ValueError(f"unknown method {method!r}")
    U = spectral_embedding(L)
    if U.shape[1] < k:
        raise DegenerateInputError(f"kernel factor has rank {U.shape[1]} < k={k}")
    U = _normalize_rows(U[:, :k])
    labels, _ = kmeans(U, k, replicates=3, seed=int(seeds[1]))
    return labels, U


def gpr_train(Xtrain, y, sigma, alpha, l=100, seed=0):
    """GP regression weights ``(L L^T + alpha I)^{-1} y`` with a Nystrom factor of ``l`` columns."""
    view = KernelView(Xtrain, KernelSpec(float(sigma)))
    y = as_vector(y, "y")
    if y.shape[0] != view.shape[0]:
        raise DimensionError(f"{y.shape[0]} labels for {view.shape[0]} points")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    L = nystrom(view, min(l, view.shape[0]), seed=seed).L
    return smw_solve(L, alpha, y)


def gpr_predict(Xtrain, Xtest, sigma, w, use_cur=False, seed=0):
    """Predictions ``K_* w``, optionally through a kernel CUR."""
    w = as_vector(w, "w")
    return _kernel_times(Xtrain, Xtest, sigma, w, use_cur, seed)


def knn_classify(test_features, train_features, train_labels, k_neighbors=1):
    """Majority vote among the ``k_neighbors`` nearest training points.

    Equal distances are resolved by training order and tied votes by the
    smallest label.
    """
    T = as_matrix(test_features, "test_features")
    F = as_matrix(train_features, "train_features")
    y = np.asarray(train_labels)
    if F.shape[0] == 0:
        raise DimensionError("empty training set")
    if T.shape[1] != F.shape[1]:
        raise DimensionError("feature dimensions differ")
    if y.shape != (F.shape[0],):
        raise DimensionError("one label per training point required")
    if not 1 <= k_neighbors <= F.shape[0]:
        raise DimensionError(f"k_neighbors must lie in [1, {F.shape[0]}]")
    classes, codes = np.unique(y, return_inverse=True)
    out = np.empty(T.shape[0], dtype=classes.dtype)
    sq = np.einsum("ij,ij->i", F, F)
    for i, t in enumerate(T):
        d2 = sq - 2.0 * (F @ t)
        near = np.argsort(d2, kind="stable")[:k_neighbors]
        votes = np.bincount(codes[near], minlength=classes.size)
        out[i] = classes[int(np.argmax(votes))]
    return out


def cluster_accuracy(true_labels, pred_labels):
    """Fraction of points labelled correctly under the best one-to-one label matching."""
    t = np.unique(np.asarray(true_labels), return_inverse=True)[1]
    p = np.unique(np.asarray(pred_labels), return_inverse=True)[1]
    if t.shape != p.shape:
        raise DimensionError("label vectors differ in length")
    M = np.zeros((t.max() + 1, p.max() + 1), dtype=np.int64)
    np.add.at(M, (t, p), 1)
    rows, cols = linear_sum_assignment(-M)
    return float(M[rows, cols].sum() / t.size)
