"""One-pass, mergeable computation of the empirical characteristic-function sketch."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .core import Bounds, CKMError, Dataset, FrequencyMatrix, Sketch

DEFAULT_CHUNK = 8192


def worker_count() -> int:
    """Worker cap taken from ``CKM_THREADS`` (defaults to the CPU count)."""
    env = os.environ.get("CKM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CKMError(f"CKM_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _phase_sums(points: np.ndarray, W: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
    theta = points @ W.T  # (L, m)
    if weights is None:
        re = np.cos(theta).sum(axis=0)
        im = np.sin(theta).sum(axis=0)
    else:
        re = weights @ np.cos(theta)
        im = weights @ np.sin(theta)
    return re - 1j * im


def _as_points(points, n: int) -> np.ndarray:
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, n)
    if X.ndim != 2 or X.shape[1] != n:
        raise CKMError(f"dimension mismatch: points have shape {X.shape}, frequencies expect n={n}")
    return X


def sketch_points(points, weights, freq: FrequencyMatrix) -> np.ndarray:
    """Weighted sketch ``sum_l beta_l exp(-i w_j . y_l)`` for every frequency ``w_j``."""
    X = _as_points(points, freq.n)
    beta = np.asarray(weights, dtype=np.float64)
    if beta.shape != (X.shape[0],):
        raise CKMError("weights length does not match number of points")
    if not np.all(np.isfinite(beta)) or np.any(beta < 0):
        raise CKMError("weights must be finite and non-negative")
    out = np.zeros(freq.m, dtype=np.complex128)
    for start in range(0, X.shape[0], DEFAULT_CHUNK):
        sl = slice(start, start + DEFAULT_CHUNK)
        out += _phase_sums(X[sl], freq.W, beta[sl])
    return out


@dataclass(frozen=True)
class PartialSketch:
    """Unnormalized running sum of atoms over the points absorbed so far."""

    freq: FrequencyMatrix
    weighted_sum: np.ndarray
    count: int = 0
    bounds: Optional[Bounds] = None

    @classmethod
    def empty(cls, freq: FrequencyMatrix) -> "PartialSketch":
        return cls(freq, np.zeros(freq.m, dtype=np.complex128), 0, None)

    def absorb(self, chunk) -> "PartialSketch":
        X = _as_points(chunk, self.freq.n)
        if X.shape[0] == 0:
            return self
        if not np.all(np.isfinite(X)):
            raise CKMError("chunk contains non-finite coordinates")
        total = self.weighted_sum.copy()
        for start in range(0, X.shape[0], DEFAULT_CHUNK):
            total += _phase_sums(X[start:start + DEFAULT_CHUNK], self.freq.W)
        bounds = Bounds(X.min(axis=0), X.max(axis=0))
        if self.bounds is not None:
            bounds = self.bounds.union(bounds)
        return PartialSketch(self.freq, total, self.count + X.shape[0], bounds)

    def merge(self, other: "PartialSketch") -> "PartialSketch":
        if not self.freq.same_as(other.freq):
            raise CKMError("cannot merge sketches built on different frequency matrices")
        if self.bounds is None:
            bounds = other.bounds
        elif other.bounds is None:
            bounds = self.bounds
        else:
            bounds = self.bounds.union(other.bounds)
        return PartialSketch(self.freq, self.weighted_sum + other.weighted_sum,
                             self.count + other.count, bounds)

    def finalize(self) -> Sketch:
        if self.count == 0:
            raise CKMError("cannot finalize an empty sketch")
        return Sketch(self.weighted_sum / self.count, self.bounds, self.count, self.freq)


def absorb(state: PartialSketch, chunk) -> PartialSketch:
    return state.absorb(chunk)


def merge(a: PartialSketch, b: PartialSketch) -> PartialSketch:
    return a.merge(b)


def finalize(state: PartialSketch) -> Sketch:
    return state.finalize()


def merge_all(parts: Iterable[PartialSketch]) -> PartialSketch:
    parts = list(parts)
    if not parts:
        raise CKMError("nothing to merge")
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    return out


def sketch_chunks(chunks: Iterable, freq: FrequencyMatrix) -> Sketch:
    """Stream an iterable of point blocks through a single partial sketch."""
    state = PartialSketch.empty(freq)
    for chunk in chunks:
        state = state.absorb(chunk)
    return state.finalize()


def sketch_dataset(data: Dataset | np.ndarray, freq: FrequencyMatrix, shards: int = 1,
                   threads: Optional[int] = None) -> Sketch:
    """Sketch a full dataset, optionally split into ``shards`` merged at the end.

    Shards run on a thread pool capped by ``threads`` (or ``CKM_THREADS``);
    the shard sums are always merged in shard order.
    """
    X = data.points if isinstance(data, Dataset) else _as_points(data, freq.n)
    if X.shape[1] != freq.n:
        raise CKMError(f"dimension mismatch: data n={X.shape[1]}, frequencies n={freq.n}")
    if X.shape[0] == 0:
        raise CKMError("empty dataset")
    shards = max(1, min(int(shards), X.shape[0]))
    blocks = np.array_split(X, shards)
    if shards == 1:
        return PartialSketch.empty(freq).absorb(X).finalize()
    workers = min(shards, threads or worker_count())
    empty = PartialSketch.empty(freq)
    if workers == 1:
        parts = [empty.absorb(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(empty.absorb, blocks))
    return merge_all(parts).finalize()
