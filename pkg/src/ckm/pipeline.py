"""Replicate orchestration shared by the CLI and the benchmarks."""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .baselines import initial_centroids, lloyd_max
from .core import CentroidModel, CKMError, Dataset, Sketch, SolverConfig, compute_bounds
from .metrics import sse
from .sketcher import worker_count
from .solver import ckm_solve


class Method(str, enum.Enum):
    CKM = "ckm"
    LLOYD = "lloyd"


@dataclass
class Run:
    model: CentroidModel
    sketch_residual: Optional[float] = None
    sse: Optional[float] = None
    wall_ms: float = 0.0


def select_best_replicate(method, runs: Sequence[Run]) -> Run:
    """Pick the best run: lowest sketch residual for CKM, lowest SSE for Lloyd.

    CKM never looks at SSE, since the data are gone once the sketch exists.
    Ties go to the earliest run.
    """
    method = Method(method)
    if not runs:
        raise CKMError("no runs to select from")
    attr = "sketch_residual" if method == Method.CKM else "sse"
    keys = [getattr(r, attr) for r in runs]
    if any(k is None for k in keys):
        raise CKMError(f"{method.value} runs must carry {attr.replace('_', ' ')}")
    return runs[int(np.argmin(keys))]


def _pool_map(fn, items, threads: Optional[int]):
    items = list(items)
    workers = min(len(items), threads or worker_count())
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def ckm_replicates(sketch: Sketch, config: SolverConfig, replicates: int = 1,
                   data: Optional[Dataset] = None, threads: Optional[int] = None) -> list[Run]:
    """Independent decoder runs with seeds ``config.seed + r``."""
    def one(r):
        t0 = time.perf_counter()
        res = ckm_solve(sketch, replace(config, seed=config.seed + r), data)
        return Run(res.model, sketch_residual=res.residual_norm,
                   wall_ms=1e3 * (time.perf_counter() - t0))
    return _pool_map(one, range(replicates), threads)


def lloyd_replicates(data: Dataset, K: int, replicates: int = 1, init="range", seed: int = 0,
                     max_iters: int = 300, threads: Optional[int] = None) -> list[Run]:
    """Independent Lloyd-Max runs; replicate ``r`` draws its start from seed ``seed + r``."""
    bounds = compute_bounds(data)

    def one(r):
        t0 = time.perf_counter()
        rng = np.random.default_rng(seed + r)
        model = lloyd_max(data, initial_centroids(data, K, init, rng, bounds), max_iters)
        return Run(model, sse=sse(data, model), wall_ms=1e3 * (time.perf_counter() - t0))
    return _pool_map(one, range(replicates), threads)


def best_ckm(sketch, config, replicates=1, data=None, threads=None) -> Run:
    return select_best_replicate(Method.CKM, ckm_replicates(sketch, config, replicates, data, threads))


def best_lloyd(data, K, replicates=1, init="range", seed=0, max_iters=300, threads=None) -> Run:
    return select_best_replicate(Method.LLOYD,
                                 lloyd_replicates(data, K, replicates, init, seed, max_iters, threads))
