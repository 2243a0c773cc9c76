"""Domain types shared across the package, plus dataset validation and bounds."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class CKMError(ValueError):
    """Raised on invalid inputs anywhere in the pipeline."""


class Distribution(enum.IntEnum):
    GAUSSIAN = 0
    ADAPTED_RADIUS = 1


class InitStrategy(str, enum.Enum):
    RANGE = "range"
    SAMPLE = "sample"
    KPP = "kpp"


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    labels: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if self.lower.shape != self.upper.shape:
            raise CKMError("bounds shape mismatch")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise CKMError("bounds must be finite")
        if np.any(self.lower > self.upper):
            raise CKMError("lower bound exceeds upper bound")

    @property
    def n(self) -> int:
        return self.lower.shape[0]

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def union(self, other: "Bounds") -> "Bounds":
        return Bounds(np.minimum(self.lower, other.lower), np.maximum(self.upper, other.upper))

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


@dataclass(frozen=True)
class FrequencySpec:
    distribution: Distribution = Distribution.ADAPTED_RADIUS
    sigma2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise CKMError("sigma2 must be positive")
        if not 0 <= self.seed < 2**64:
            raise CKMError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class FrequencyMatrix:
    W: np.ndarray  # (m, n), one frequency per row
    spec: FrequencySpec = field(default_factory=FrequencySpec)

    def __post_init__(self):
        if self.W.ndim != 2 or self.W.shape[0] < 1 or self.W.shape[1] < 1:
            raise CKMError("frequency matrix must be a non-empty 2-D array")
        if not np.all(np.isfinite(self.W)):
            raise CKMError("frequency matrix has non-finite entries")

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def n(self) -> int:
        return self.W.shape[1]

    def same_as(self, other: "FrequencyMatrix") -> bool:
        return self is other or (self.W.shape == other.W.shape and np.array_equal(self.W, other.W))


@dataclass(frozen=True)
class Sketch:
    values: np.ndarray  # complex128, (m,)
    bounds: Bounds
    count: int
    freq: FrequencyMatrix

    def __post_init__(self):
        if self.count < 1:
            raise CKMError("sketch count must be >= 1")
        if self.values.shape != (self.freq.m,):
            raise CKMError("sketch length does not match frequency count")

    @property
    def m(self) -> int:
        return self.freq.m

    @property
    def n(self) -> int:
        return self.freq.n


@dataclass(frozen=True)
class CentroidModel:
    centroids: np.ndarray  # (K, n)
    weights: np.ndarray  # (K,)

    def __post_init__(self):
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            raise CKMError("a model needs at least one centroid")
        if self.weights.shape != (self.centroids.shape[0],):
            raise CKMError("weights length does not match centroid count")
        if np.any(self.weights < 0):
            raise CKMError("weights must be non-negative")

    @property
    def K(self) -> int:
        return self.centroids.shape[0]

    @property
    def n(self) -> int:
        return self.centroids.shape[1]


@dataclass(frozen=True)
class SolverConfig:
    K: int
    init_strategy: InitStrategy = InitStrategy.RANGE
    max_ascent_iters: int = 300
    max_descent_iters: int = 500
    grad_tol: float = 1e-8
    step_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise CKMError("K must be >= 1")
        if self.max_ascent_iters < 1 or self.max_descent_iters < 1:
            raise CKMError("iteration limits must be positive")
        if not (self.grad_tol > 0 and self.step_tol > 0):
            raise CKMError("tolerances must be positive")
        object.__setattr__(self, "init_strategy", InitStrategy(self.init_strategy))


def validate_dataset(points, labels=None) -> Dataset:
    """Build a :class:`Dataset`, rejecting malformed or non-finite input."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise CKMError("points must be a 2-D array")
    if X.shape[0] < 1:
        raise CKMError("empty dataset")
    if X.shape[1] < 1:
        raise CKMError("points must have at least one dimension")
    if not np.all(np.isfinite(X)):
        raise CKMError("dataset contains non-finite coordinates")
    y = None
    if labels is not None:
        y = np.asarray(labels)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise CKMError(f"labels length {y.shape[0] if y.ndim else 0} does not match N={X.shape[0]}")
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise CKMError("labels must be integers")
        y = y.astype(np.int64)
    return Dataset(np.ascontiguousarray(X), y)


def compute_bounds(dataset) -> Bounds:
    X = dataset.points if isinstance(dataset, Dataset) else np.asarray(dataset, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise CKMError("empty dataset")
    return Bounds(X.min(axis=0), X.max(axis=0))
