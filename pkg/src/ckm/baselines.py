"""Lloyd-Max K-means and k-means++ seeding."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .core import Bounds, CentroidModel, CKMError, Dataset, InitStrategy, compute_bounds


def _points(data) -> np.ndarray:
    return data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)


def sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d2 = (X**2).sum(axis=1)[:, None] - 2.0 * X @ C.T + (C**2).sum(axis=1)[None, :]
    return np.maximum(d2, 0.0)


def nearest(X: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest centroid per point (ties to the lower index) and its squared distance."""
    d2 = sq_distances(X, C)
    idx = np.argmin(d2, axis=1)  # argmin returns the first minimum
    return idx, d2[np.arange(len(X)), idx]


def lloyd_max(data, init, max_iters: int = 300, trace: Optional[list] = None) -> CentroidModel:
    """Classic Lloyd iterations from the given initial centroids.

    Stops when assignments no longer change. An empty cluster is re-seeded
    with the point farthest from its assigned centroid. If ``trace`` is a
    list, the SSE after each assignment step is appended to it.
    """
    X = _points(data)
    C = np.array(init, dtype=np.float64, copy=True)
    K = C.shape[0]
    N = X.shape[0]
    if K > N:
        raise CKMError(f"K={K} exceeds the number of points N={N}")
    if C.shape[1] != X.shape[1]:
        raise CKMError("initial centroids do not match data dimension")
    labels = None
    for _ in range(max_iters):
        new_labels, d2 = nearest(X, C)
        if trace is not None:
            trace.append(float(d2.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        d2 = d2.copy()
        while True:
            counts = np.bincount(labels, minlength=K)
            empty = np.flatnonzero(counts == 0)
            if empty.size == 0:
                break
            # A moved point is never moved again, so this terminates (K <= N).
            far = int(np.argmax(d2))
            labels[far] = empty[0]
            d2[far] = -np.inf
        sums = np.zeros_like(C)
        np.add.at(sums, labels, X)
        C = sums / counts[:, None]
    labels, _ = nearest(X, C)
    weights = np.bincount(labels, minlength=K) / N
    return CentroidModel(C, weights)


def kmeanspp_seed(data, K: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: D^2-weighted sampling, uniform fallback when all D^2 vanish."""
    X = _points(data)
    N = X.shape[0]
    if K > N:
        raise CKMError(f"K={K} exceeds the number of points N={N}")
    seeds = [int(rng.integers(N))]
    d2 = sq_distances(X, X[seeds])[:, 0]
    d2[seeds[0]] = 0.0
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(N, p=d2 / total))
        else:
            idx = int(rng.integers(N))
        seeds.append(idx)
        d2 = np.minimum(d2, sq_distances(X, X[idx:idx + 1])[:, 0])
        d2[idx] = 0.0
    return X[seeds].copy()


def initial_centroids(data, K: int, strategy, rng: np.random.Generator,
                      bounds: Optional[Bounds] = None) -> np.ndarray:
    """K starting centroids for Lloyd-Max under the range/sample/kpp strategies."""
    X = _points(data)
    strategy = InitStrategy(strategy)
    if strategy == InitStrategy.RANGE:
        b = bounds or compute_bounds(X)
        return b.lower + (b.upper - b.lower) * rng.random((K, X.shape[1]))
    if strategy == InitStrategy.SAMPLE:
        if K > len(X):
            raise CKMError(f"K={K} exceeds the number of points N={len(X)}")
        return X[rng.choice(len(X), size=K, replace=False)].copy()
    return kmeanspp_seed(X, K, rng)

