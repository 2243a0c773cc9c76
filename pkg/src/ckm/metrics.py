"""Clustering quality measures."""

from __future__ import annotations

import numpy as np

from .baselines import nearest
from .core import CentroidModel, CKMError, Dataset

METRICS_HEADER = ["run_id", "method", "replicates", "m", "K", "n", "N", "sse", "ari", "wall_ms"]


def _split(data, model):
    X = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    C = model.centroids if isinstance(model, CentroidModel) else np.asarray(model, dtype=np.float64)
    if X.ndim != 2 or C.ndim != 2 or X.shape[1] != C.shape[1]:
        raise CKMError("dimension mismatch between data and centroids")
    return X, C


def assign_labels(data, model) -> np.ndarray:
    X, C = _split(data, model)
    return nearest(X, C)[0]


def sse(data, model) -> float:
    """Sum over points of the squared distance to the nearest centroid."""
    X, C = _split(data, model)
    labels = nearest(X, C)[0]
    # Exact distances for the chosen centroids avoid cancellation in the expanded form.
    return float(np.sum((X - C[labels]) ** 2))


def relative_sse(candidate, reference, data) -> float:
    ref = sse(data, reference)
    if ref <= 0:
        raise CKMError("degenerate reference: reference SSE is zero")
    return sse(data, candidate) / ref


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def ari(labels_a, labels_b) -> float:
    """Hubert-Arabie adjusted Rand index from the pair-count contingency table."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise CKMError("label vectors must have equal length")
    if a.size < 2:
        raise CKMError("ARI needs at least two points")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    index = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(a.size)
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # Both partitions trivial (all singletons or one cluster): identical iff equal.
        return 1.0
    return float((index - expected) / (max_index - expected))
