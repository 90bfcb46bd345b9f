"""Seeded synthetic fixtures: test matrices, regression problems and point clouds."""

import numpy as np

from .apps import Dataset
from .linalg import DimensionError

__all__ = [
    "gaussian_matrix",
    "spectrum_matrix",
    "powerlaw_matrix",
    "low_rank_matrix",
    "conditioned_lsr",
    "noisy_lsr",
    "planted_blobs",
    "repeated_points",
]


def _orth(rng, n, k):
    Q, R = np.linalg.qr(rng.standard_normal((n, k)))
    return Q * np.sign(np.diag(R))


def gaussian_matrix(m, n, seed):
    return np.random.default_rng(seed).standard_normal((m, n))


def spectrum_matrix(m, n, singular_values, seed):
    """``U diag(s) V^T`` with Haar-random orthonormal ``U`` and ``V``."""
    s = np.asarray(singular_values, dtype=np.float64)
    r = s.size
    if r > min(m, n):
        raise DimensionError(f"{r} singular values do not fit a {m}x{n} matrix")
    rng = np.random.default_rng(seed)
    return (_orth(rng, m, r) * s) @ _orth(rng, n, r).T


def powerlaw_matrix(m, n, alpha=1.0, seed=0):
    """Singular values ``i^(-alpha)``, ``i = 1..min(m, n)``."""
    r = min(m, n)
    return spectrum_matrix(m, n, np.arange(1.0, r + 1) ** (-alpha), seed)


def low_rank_matrix(m, n, rank, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, rank)) @ rng.standard_normal((rank, n))


def conditioned_lsr(n, d, cond, residual=1e-3, seed=0):
    """``(A, b, x0)`` with ``cond(A) = cond`` and ``b = A x0 + r``, ``r`` orthogonal to ``range(A)``.

    The singular values of ``A`` are log-spaced from 1 down to ``1/cond``.
    """
    rng = np.random.default_rng(seed)
    U = _orth(rng, n, d)
    A = (U * np.logspace(0, -np.log10(cond), d)) @ _orth(rng, d, d).T
    x0 = rng.standard_normal(d)
    r = rng.standard_normal(n)
    r -= U @ (U.T @ r)
    r *= residual / np.linalg.norm(r)
    return A, A @ x0 + r, x0


def noisy_lsr(n, d, noise=1.0, seed=0):
    """Gaussian ``A`` and ``b = A x0 + noise * e``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    x0 = rng.standard_normal(d)
    return A, A @ x0 + noise * rng.standard_normal(n), x0


def planted_blobs(n, k=3, d=2, spread=1.0, separation=6.0, seed=0):
    """``k`` isotropic Gaussian clusters of (almost) equal size.

    Centers sit on a circle of radius ``separation / (2 sin(pi / k))`` in the
    first two coordinates, so neighbouring centers are ``separation`` apart.
    """
    if d < 2 or k < 1 or n < k:
        raise DimensionError("need d >= 2 and 1 <= k <= n")
    rng = np.random.default_rng(seed)
    radius = separation / (2 * np.sin(np.pi / k)) if k > 1 else 0.0
    angles = 2 * np.pi * np.arange(k) / k
    centers = np.zeros((k, d))
    centers[:, 0] = radius * np.cos(angles)
    centers[:, 1] = radius * np.sin(angles)
    labels = np.arange(n) % k
    points = centers[labels] + spread * rng.standard_normal((n, d))
    return Dataset(points=points, labels=labels)


def repeated_points(n, r, d=3, seed=0):
    """``n`` points made of ``r`` distinct locations, so any kernel on them has rank ``<= r``."""
    if not 1 <= r <= n:
        raise DimensionError(f"need 1 <= r={r} <= n={n}")
    rng = np.random.default_rng(seed)
    base = 3.0 * rng.standard_normal((r, d))
    return base[rng.permutation(np.arange(n) % r)]
