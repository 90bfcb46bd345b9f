import numpy as np

from . import _kernels


def lloyd(points, centroids, iters):
    """Run at most ``iters`` Lloyd iterations from the given centroids.

    An empty cluster is re-seeded with the point farthest from its current
    centroid.  Returns ``(labels, centroids, inertia)``.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    centroids = np.array(centroids, dtype=np.float64)
    k = centroids.shape[0]
    labels, dists = _kernels.nearest_centroid(points, centroids)
    for _ in range(iters):
        counts = np.bincount(labels, minlength=k)
        for _ in range(k):
            empty = np.flatnonzero(counts == 0)
            if empty.size == 0:
                break
            far = int(np.argmax(dists))
            labels[far] = empty[0]
            dists[far] = 0.0
            counts = np.bincount(labels, minlength=k)
        new = np.zeros_like(centroids)
        np.add.at(new, labels, points)
        new /= counts[:, None]
        if np.array_equal(new, centroids):
            break
        centroids = new
        labels, dists = _kernels.nearest_centroid(points, centroids)
    return labels, centroids, float(dists.sum())
