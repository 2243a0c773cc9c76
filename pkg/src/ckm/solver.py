"""Compressive K-means decoder.

Recovers ``K`` weighted Diracs whose sketch matches a dataset sketch, by a
greedy loop of ``2K`` iterations: add the atom most correlated with the
residual, hard-threshold back to ``K`` atoms, re-project the weights with
NNLS, then polish all centroids and weights jointly by gradient descent.
Both inner optimizations respect the box bounds recorded with the sketch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    Bounds,
    CentroidModel,
    CKMError,
    Dataset,
    FrequencyMatrix,
    InitStrategy,
    Sketch,
    SolverConfig,
)

log = logging.getLogger(__name__)

DUPLICATE_TOL = 1e-10
DUPLICATE_JITTER = 1e-6


@dataclass(frozen=True)
class AscentOptions:
    """Projected-gradient settings shared by the Step-1 ascent and Step-5 descent."""

    max_iters: int = 300
    initial_step: float = 1.0
    shrink: float = 0.5
    grad_tol: float = 1e-8
    step_tol: float = 1e-10
    armijo: float = 1e-4
    ftol: float = 1e-9
    max_backtracks: int = 60

    def __post_init__(self):
        if self.max_iters < 1 or self.initial_step <= 0 or self.grad_tol <= 0 or self.step_tol <= 0:
            raise CKMError("optimizer options must be positive")
        if not 0 < self.shrink < 1:
            raise CKMError("shrink factor must lie in (0, 1)")


@dataclass
class SolverState:
    residual: np.ndarray
    support: np.ndarray
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    history: list = field(default_factory=list)

    @property
    def cost(self) -> float:
        return float(np.linalg.norm(self.residual))


# ---------------------------------------------------------------------------
# atoms and the sketch-domain objective


def _W(freq) -> np.ndarray:
    return freq.W if isinstance(freq, FrequencyMatrix) else np.asarray(freq, dtype=np.float64)


def atom(c, freq) -> np.ndarray:
    """Sketch of a Dirac at ``c``: ``exp(-i w_j . c)`` for each frequency."""
    return np.exp(-1j * (_W(freq) @ np.asarray(c, dtype=np.float64)))


def atoms(C, freq) -> np.ndarray:
    """Atoms of every row of ``C``, stacked as a (K, m) array."""
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    return np.exp(-1j * (C @ _W(freq).T))


def correlation(c, residual, freq) -> float:
    W = _W(freq)
    m = W.shape[0]
    a = np.exp(1j * (W @ c))  # conj(atom)
    return float(np.real(a @ residual)) / np.sqrt(m)


def correlation_grad(c, residual, freq) -> np.ndarray:
    W = _W(freq)
    m = W.shape[0]
    a = np.exp(1j * (W @ c))
    return -(np.imag(a * residual) @ W) / np.sqrt(m)


def _neg_correlation(c, residual, W, inv_sqrt_m):
    prod = np.exp(1j * (W @ c)) * residual
    return -float(np.real(prod).sum()) * inv_sqrt_m, (np.imag(prod) @ W) * inv_sqrt_m


def sketch_cost(C, alpha, z, freq) -> float:
    """Squared sketch-matching cost ``||z - sum_k alpha_k atom(c_k)||^2``."""
    r = z - np.asarray(alpha) @ atoms(C, freq)
    return float(np.vdot(r, r).real)


def sketch_cost_grad(C, alpha, z, freq) -> tuple[float, np.ndarray, np.ndarray]:
    """Cost plus its gradients with respect to the centroids and the weights."""
    W = _W(freq)
    A = np.exp(-1j * (np.asarray(C) @ W.T))
    r = z - alpha @ A
    cost = float(np.vdot(r, r).real)
    prod = np.conj(A) * r  # (K, m)
    g_alpha = -2.0 * prod.real.sum(axis=1)
    g_C = 2.0 * alpha[:, None] * (prod.imag @ W)
    return cost, g_C, g_alpha


# ---------------------------------------------------------------------------
# projected gradient with Armijo backtracking


def _projected_gradient(fg: Callable, x0: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                        opts: AscentOptions) -> tuple[np.ndarray, float, int]:
    """Minimize ``fg`` over the box ``[lower, upper]``.

    The first trial step is ``opts.initial_step``; later trial steps use the
    Barzilai-Borwein ratio of the last accepted move. Every step is projected
    and must satisfy the Armijo condition, so the objective never increases.
    """
    x = np.clip(x0, lower, upper)
    f, g = fg(x)
    step = opts.initial_step
    it = 0
    for it in range(1, opts.max_iters + 1):
        pg = x - np.clip(x - g, lower, upper)
        if np.max(np.abs(pg), initial=0.0) <= opts.grad_tol:
            break
        accepted = False
        for _ in range(opts.max_backtracks):
            x_new = np.clip(x - step * g, lower, upper)
            d = x_new - x
            decrease = g @ d
            if decrease >= 0:
                step *= opts.shrink
                continue
            f_new, g_new = fg(x_new)
            if f_new <= f + opts.armijo * decrease:
                accepted = True
                break
            step *= opts.shrink
        if not accepted:
            break
        s, y = d, g_new - g
        f_prev = f
        x, f, g = x_new, f_new, g_new
        if np.max(np.abs(s)) <= opts.step_tol * (1.0 + np.max(np.abs(x))):
            break
        if f_prev - f <= opts.ftol * max(abs(f_prev), abs(f), 1.0):
            break
        sy = s @ y
        step = (s @ s) / sy if sy > 0 else step / opts.shrink
        step = float(np.clip(step, 1e-12, 1e12))
    return x, f, it


def maximize_c(init, residual, freq, bounds: Bounds, opts: Optional[AscentOptions] = None) -> np.ndarray:
    """Local maximizer of the normalized atom-residual correlation inside ``bounds``."""
    opts = opts or AscentOptions()
    W = _W(freq)
    inv = 1.0 / np.sqrt(W.shape[0])
    x0 = bounds.clip(np.asarray(init, dtype=np.float64))
    c, _, _ = _projected_gradient(lambda c: _neg_correlation(c, residual, W, inv),
                                  x0, bounds.lower, bounds.upper, opts)
    return c


def global_descent(C, alpha, z, freq, bounds: Bounds, opts: Optional[AscentOptions] = None):
    """Jointly descend the sketch cost over centroids (boxed) and weights (>= 0)."""
    opts = opts or AscentOptions(max_iters=500)
    W = _W(freq)
    m = W.shape[0]
    C = np.asarray(C, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    K, n = C.shape
    # Diagonal rescaling x = scale * y from the Gauss-Newton curvature at the start:
    # 2m for a weight, 2 alpha_k^2 sum_j w_jd^2 for coordinate d of centroid k.
    a_floor = np.maximum(alpha, 0.1 * max(alpha.max(initial=0.0), 1.0 / (10 * K)))
    curv_C = 2.0 * a_floor[:, None] ** 2 * (W**2).sum(axis=0)[None, :]
    scale = 1.0 / np.sqrt(np.concatenate([curv_C.ravel(), np.full(K, 2.0 * m)]))
    lower = np.concatenate([np.tile(bounds.lower, K), np.zeros(K)]) / scale
    upper = np.concatenate([np.tile(bounds.upper, K), np.full(K, np.inf)]) / scale

    def fg(y):
        x = y * scale
        cost, g_C, g_a = sketch_cost_grad(x[:K * n].reshape(K, n), x[K * n:], z, W)
        return cost, np.concatenate([g_C.ravel(), g_a]) * scale

    x0 = np.concatenate([C.ravel(), alpha])
    y, _, _ = _projected_gradient(fg, x0 / scale, lower, upper, opts)
    x = y * scale
    C_out = np.clip(x[:K * n].reshape(K, n), bounds.lower, bounds.upper)
    return C_out, np.maximum(x[K * n:], 0.0)


# ---------------------------------------------------------------------------
# non-negative least squares


def nnls_real(A: np.ndarray, b: np.ndarray, tol: float = 1e-10, max_iter: Optional[int] = None) -> np.ndarray:
    """Lawson-Hanson active-set solution of ``min ||Ax - b||`` subject to ``x >= 0``."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise CKMError("nnls inputs must be finite")
    p = A.shape[1]
    if p < 1:
        raise CKMError("nnls needs at least one column")
    scale = max(1.0, float(np.linalg.norm(A, np.inf) * np.linalg.norm(b, np.inf)))
    tol = tol * scale
    max_iter = max_iter or 30 * p
    x = np.zeros(p)
    passive = np.zeros(p, dtype=bool)
    w = A.T @ (b - A @ x)
    for _ in range(max_iter):
        candidates = ~passive & (w > tol)
        if not candidates.any():
            break
        j = int(np.argmax(np.where(candidates, w, -np.inf)))
        passive[j] = True
        while True:
            s = np.zeros(p)
            s[passive] = np.linalg.lstsq(A[:, passive], b, rcond=None)[0]
            if np.all(s[passive] > 0):
                x = s
                break
            neg = passive & (s <= 0)
            ratio = x[neg] / (x[neg] - s[neg])
            step = float(np.min(ratio))
            x = x + step * (s - x)
            passive &= x > tol * 1e-3
            if not passive.any():
                # Ties can remove everything including j; fall back to x = 0.
                x[:] = 0.0
                break
            x[~passive] = 0.0
        w = A.T @ (b - A @ x)
    return np.maximum(x, 0.0)


def nnls(columns, target, tol: float = 1e-10) -> np.ndarray:
    """NNLS for complex columns, solved on the stacked real/imaginary system."""
    cols = np.asarray(columns)
    t = np.asarray(target)
    if cols.ndim == 1:
        cols = cols[:, None]
    A = np.vstack([cols.real, cols.imag])
    b = np.concatenate([t.real, t.imag])
    return nnls_real(A, b, tol=tol)


def hard_threshold(C, beta, K: int):
    """Keep the ``K`` rows of ``C`` with the largest ``beta`` (ties: lower index).

    Returns the kept rows and their original indices, in index order.
    """
    C = np.asarray(C)
    beta = np.asarray(beta)
    if len(C) != len(beta):
        raise CKMError("support and weights differ in length")
    if K >= len(C):
        return C, np.arange(len(C))
    order = np.lexsort((np.arange(len(beta)), -beta))
    keep = np.sort(order[:K])
    return C[keep], keep


def project_weights(C, sketch, freq: Optional[FrequencyMatrix] = None) -> np.ndarray:
    """Non-negative weights best fitting the sketch with unnormalized atoms of ``C``."""
    if isinstance(sketch, Sketch):
        z, freq = sketch.values, sketch.freq
    else:
        z = np.asarray(sketch)
        if freq is None:
            raise CKMError("frequency matrix required for a raw sketch vector")
    C = np.atleast_2d(C)
    if len(C) < 1:
        raise CKMError("empty support")
    return nnls(atoms(C, freq).T, z)


# ---------------------------------------------------------------------------
# initialization


def pick_init(strategy, bounds: Bounds, current_C, data: Optional[Dataset | np.ndarray],
              rng: np.random.Generator) -> np.ndarray:
    """Starting point for the Step-1 ascent.

    range: uniform in the box. sample: a random data point. kpp: a data point
    drawn with probability proportional to its squared distance to the
    current support (uniform when the support is empty or every distance is 0).
    """
    strategy = InitStrategy(strategy)
    if strategy == InitStrategy.RANGE:
        return bounds.lower + (bounds.upper - bounds.lower) * rng.random(bounds.n)
    if data is None:
        raise CKMError("initialization requires data access (sample/kpp strategies need --data)")
    X = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if strategy == InitStrategy.SAMPLE:
        return bounds.clip(X[rng.integers(len(X))].copy())
    current_C = np.asarray(current_C, dtype=np.float64).reshape(-1, X.shape[1])
    if len(current_C) == 0:
        return bounds.clip(X[rng.integers(len(X))].copy())
    d2 = _min_sq_dist(X, current_C)
    total = d2.sum()
    if not total > 0:
        idx = rng.integers(len(X))
    else:
        idx = rng.choice(len(X), p=d2 / total)
    return bounds.clip(X[idx].copy())


def _min_sq_dist(X, C):
    d2 = (X**2).sum(axis=1)[:, None] - 2 * X @ C.T + (C**2).sum(axis=1)[None, :]
    return np.maximum(d2.min(axis=1), 0.0)


# ---------------------------------------------------------------------------
# the decoder


@dataclass
class CKMResult:
    model: CentroidModel
    state: SolverState

    @property
    def residual_norm(self) -> float:
        return self.state.cost


def ckm_solve(sketch: Sketch, config: SolverConfig, data_access: Optional[Dataset] = None,
              check_invariants: bool = False) -> CKMResult:
    """Run the decoder and return the model together with the final solver state."""
    strategy = config.init_strategy
    if strategy != InitStrategy.RANGE and data_access is None:
        raise CKMError("initialization requires data access (sample/kpp strategies need --data)")
    K = config.K
    W = sketch.freq.W
    m, n = W.shape
    z = sketch.values
    bounds = sketch.bounds
    rng = np.random.default_rng(config.seed)
    sqrt_m = np.sqrt(m)
    ascent = AscentOptions(max_iters=config.max_ascent_iters, grad_tol=config.grad_tol * sqrt_m,
                           step_tol=config.step_tol)
    descent = AscentOptions(max_iters=config.max_descent_iters, grad_tol=config.grad_tol * sqrt_m,
                            step_tol=config.step_tol)

    state = SolverState(residual=z.copy(), support=np.zeros((0, n)))
    C = state.support
    alpha = np.zeros(0)
    for t in range(1, 2 * K + 1):
        # Step 1: new centroid
        c0 = pick_init(strategy, bounds, C, data_access, rng)
        c = maximize_c(c0, state.residual, W, bounds, ascent)
        if len(C) and np.min(np.linalg.norm(C - c, axis=1)) <= DUPLICATE_TOL:
            jitter = DUPLICATE_JITTER * (bounds.upper - bounds.lower) * rng.uniform(-1, 1, n)
            c = bounds.clip(c + jitter)
        # Step 2: expand support
        C = np.vstack([C, c])
        # Step 3: hard thresholding with normalized atoms
        if len(C) > K:
            state.beta = nnls(atoms(C, W).T / sqrt_m, z)
            C, _ = hard_threshold(C, state.beta, K)
        # Step 4: weights on unnormalized atoms
        alpha = project_weights(C, z, sketch.freq)
        # Step 5: joint polish
        cost_before = sketch_cost(C, alpha, z, W)
        C, alpha = global_descent(C, alpha, z, W, bounds, descent)
        state.residual = z - alpha @ atoms(C, W)
        state.support, state.alpha = C, alpha
        state.history.append(state.cost)
        if check_invariants:
            assert len(C) <= K + 1
            assert sketch_cost(C, alpha, z, W) <= cost_before + 1e-12 * max(1.0, cost_before)
        log.debug("ckm iter %d: |C|=%d cost=%.6g", t, len(C), state.cost)

    total = alpha.sum()
    weights = alpha / total if total > 0 else np.full(len(alpha), 1.0 / len(alpha))
    return CKMResult(CentroidModel(C.copy(), weights), state)


def ckm(sketch: Sketch, config: SolverConfig, data_access: Optional[Dataset] = None) -> CentroidModel:
    """Recover ``config.K`` centroids and their weights from ``sketch``."""
    return ckm_solve(sketch, config, data_access).model


def sketch_residual(model: CentroidModel, sketch: Sketch) -> float:
    """Norm of the sketch mismatch of a model, using its stored weights."""
    return float(np.linalg.norm(sketch.values - model.weights @ atoms(model.centroids, sketch.freq)))
