"""Synthetic Gaussian-mixture data for benchmarks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CKMError, Dataset


@dataclass(frozen=True)
class GmmGenConfig:
    K: int = 10
    n: int = 10
    N: int = 300_000
    c: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if min(self.K, self.n, self.N) < 1:
            raise CKMError("K, n and N must all be >= 1")
        if not self.c > 0:
            raise CKMError("separation constant c must be positive")


def gmm_means(config: GmmGenConfig, rng: np.random.Generator) -> np.ndarray:
    # Means ~ N(0, c K^{1/n} I): per-coordinate variance c * K**(1/n).
    std = np.sqrt(config.c * config.K ** (1.0 / config.n))
    return rng.standard_normal((config.K, config.n)) * std


def gen_gmm(config: GmmGenConfig, return_means: bool = False):
    """Uniform mixture of K unit-variance isotropic Gaussians with random means.

    Labels hold the generating component of each point.
    """
    rng = np.random.default_rng(config.seed)
    means = gmm_means(config, rng)
    labels = rng.integers(0, config.K, size=config.N)
    points = means[labels] + rng.standard_normal((config.N, config.n))
    data = Dataset(points, labels.astype(np.int64))
    return (data, means) if return_means else data
