"""Frequency sampling for the sketching operator.

Every generator is a ``numpy.random.Generator`` backed by PCG64 and seeded
with the 64-bit seed of a FrequencySpec, so a (FrequencySpec, m, n) triple
always yields the same matrix. Sketch files store ``W`` explicitly, so
nothing downstream depends on reproducing this stream.
"""

from __future__ import annotations

import numpy as np

from .core import CKMError, Dataset, Distribution, FrequencyMatrix, FrequencySpec

_RADIUS_GRID_SIZE = 10_000
_RADIUS_GRID_MAX = 10.0  # in units of 1/sigma
_PAIR_COUNT = 1000


def _radius_table() -> tuple[np.ndarray, np.ndarray]:
    # Unit-scale density p(u) ∝ sqrt(u^2 + u^4/4) exp(-u^2/2); R = u / sigma.
    u = np.linspace(0.0, _RADIUS_GRID_MAX, _RADIUS_GRID_SIZE)
    pdf = np.sqrt(u**2 + u**4 / 4.0) * np.exp(-(u**2) / 2.0)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(u))])
    cdf /= cdf[-1]
    return u, cdf


_U_GRID, _U_CDF = _radius_table()


def adapted_radius_pdf(R, sigma2: float = 1.0) -> np.ndarray:
    """Unnormalized adapted-radius density evaluated at radii ``R``."""
    R = np.asarray(R, dtype=np.float64)
    s2R2 = sigma2 * R**2
    return np.sqrt(s2R2 + s2R2**2 / 4.0) * np.exp(-s2R2 / 2.0)


def sample_adapted_radius(size: int, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Draw radii by inverting the tabulated CDF on [0, 10/sigma]."""
    q = rng.random(size)
    return np.interp(q, _U_CDF, _U_GRID) / np.sqrt(sigma2)


def sample_frequencies(spec: FrequencySpec, m: int, n: int) -> FrequencyMatrix:
    """Draw ``m`` frequency vectors in ``R^n`` from the distribution in ``spec``.

    Gaussian: i.i.d. N(0, 1/sigma2) coordinates.
    AdaptedRadius: ``R * phi`` with ``phi`` uniform on the unit sphere.
    """
    if m < 1 or n < 1:
        raise CKMError(f"need m >= 1 and n >= 1, got m={m}, n={n}")
    rng = np.random.default_rng(spec.seed)
    scale = 1.0 / np.sqrt(spec.sigma2)
    if spec.distribution == Distribution.GAUSSIAN:
        W = rng.standard_normal((m, n)) * scale
    elif spec.distribution == Distribution.ADAPTED_RADIUS:
        phi = rng.standard_normal((m, n))
        norms = np.linalg.norm(phi, axis=1, keepdims=True)
        # A zero draw has probability zero; re-draw defensively rather than divide by 0.
        while np.any(norms == 0):
            bad = norms[:, 0] == 0
            phi[bad] = rng.standard_normal((int(bad.sum()), n))
            norms = np.linalg.norm(phi, axis=1, keepdims=True)
        phi /= norms
        W = phi * sample_adapted_radius(m, spec.sigma2, rng)[:, None]
    else:
        raise CKMError(f"unknown distribution {spec.distribution!r}")
    return FrequencyMatrix(W, spec)


def estimate_sigma2(subsample: Dataset | np.ndarray, seed: int = 0, pairs: int = _PAIR_COUNT) -> float:
    """Moment estimate of the data scale: mean squared pair distance over ``2n``.

    Scaling the points by ``s`` scales the estimate by ``s**2``.
    """
    X = subsample.points if isinstance(subsample, Dataset) else np.asarray(subsample, dtype=np.float64)
    N, n = X.shape
    if N < 2 or np.all(X == X[0]):
        raise CKMError("degenerate subsample")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, N, size=pairs)
    # Second index drawn from the other N-1 points so no pair is a self-pair.
    j = (i + rng.integers(1, N, size=pairs)) % N
    d2 = np.sum((X[i] - X[j]) ** 2, axis=1)
    sigma2 = float(np.mean(d2) / (2 * n))
    if sigma2 <= 0:
        # Every sampled pair happened to coincide; fall back to all pairs against the mean.
        sigma2 = float(np.mean(np.sum((X - X.mean(axis=0)) ** 2, axis=1)) / n)
    return sigma2
