"""Named experiments: phase transition, initialization stability, timing.

Each experiment returns a list of dict rows ready for ``csv.DictWriter``.
"""

from __future__ import annotations

import time
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import CKMError, Distribution, FrequencySpec, SolverConfig
from .datagen import GmmGenConfig, gen_gmm
from .frequencies import estimate_sigma2, sample_frequencies
from .metrics import sse
from .pipeline import best_ckm, best_lloyd, ckm_replicates, lloyd_replicates
from .sketcher import sketch_dataset

SIGMA2_SUBSAMPLE = 5000


def make_instance(K: int, n: int, N: int, m: int, seed: int, c: float = 1.5,
                  distribution=Distribution.ADAPTED_RADIUS, shards: int = 1):
    """Draw a GMM dataset and its sketch; sigma2 is estimated from a subsample."""
    data = gen_gmm(GmmGenConfig(K=K, n=n, N=N, c=c, seed=seed))
    sub = data.points[:SIGMA2_SUBSAMPLE]
    try:
        sigma2 = estimate_sigma2(sub, seed=seed)
    except CKMError:
        sigma2 = 1.0
    freq = sample_frequencies(FrequencySpec(distribution, sigma2, seed), m, n)
    t0 = time.perf_counter()
    sketch = sketch_dataset(data, freq, shards=shards)
    sketch_ms = 1e3 * (time.perf_counter() - t0)
    return data, sketch, sketch_ms


def relative_sse_trial(K: int, n: int, N: int, m: int, seed: int, ckm_replicates_: int = 1,
                       lloyd_replicates_: int = 5) -> dict:
    data, sketch, _ = make_instance(K, n, N, m, seed)
    ckm_run = best_ckm(sketch, SolverConfig(K=K, seed=seed), ckm_replicates_)
    lloyd_run = best_lloyd(data, K, lloyd_replicates_, seed=seed)
    s_ckm = sse(data, ckm_run.model)
    return {"seed": seed, "sse_ckm": s_ckm, "sse_kmeans": lloyd_run.sse,
            "relative_sse": s_ckm / lloyd_run.sse}


def phase_transition(vary: str = "K", values: Sequence[int] = (2, 5, 10),
                     ratios: Sequence[float] = (1, 2, 5, 10), fixed: int = 10, N: int = 20_000,
                     trials: int = 3, seed: int = 0) -> list[dict]:
    """Relative SSE (CKM / best-of-5 Lloyd) over a grid of m/(Kn) and K or n."""
    if vary not in ("K", "n"):
        raise CKMError("vary must be 'K' or 'n'")
    rows = []
    for v in values:
        K, n = (v, fixed) if vary == "K" else (fixed, v)
        for ratio in ratios:
            m = max(1, int(round(ratio * K * n)))
            rel = []
            for t in range(trials):
                r = relative_sse_trial(K, n, N, m, seed + t)
                rel.append(r["relative_sse"])
                rows.append({"K": K, "n": n, "N": N, "m": m, "m_over_Kn": m / (K * n),
                             "trial": t, **r})
    return rows


def stability(K: int = 10, n: int = 10, N: int = 20_000, m: int = 500, runs: int = 20,
              datasets: int = 1, inits: Iterable[str] = ("range", "sample", "kpp"),
              seed: int = 0) -> list[dict]:
    """SSE of single-replicate CKM and Lloyd runs under each initialization."""
    rows = []
    for d in range(datasets):
        data, sketch, _ = make_instance(K, n, N, m, seed + d)
        for init in inits:
            cfg = SolverConfig(K=K, init_strategy=init, seed=0)
            access = None if init == "range" else data
            for r, run in enumerate(ckm_replicates(sketch, cfg, runs, access)):
                rows.append({"dataset": seed + d, "method": "ckm", "init": init, "run": r,
                             "sse": sse(data, run.model)})
            for r, run in enumerate(lloyd_replicates(data, K, runs, init, seed=0)):
                rows.append({"dataset": seed + d, "method": "kmeans", "init": init, "run": r,
                             "sse": run.sse})
    return rows


def interquartile_range(x) -> float:
    q1, q3 = np.percentile(np.asarray(x, dtype=np.float64), [25, 75])
    return float(q3 - q1)


def timing(Ns: Sequence[int] = (10_000, 100_000, 1_000_000), K: int = 10, n: int = 10,
           m: int = 500, seed: int = 0, shards: int = 1, lloyd_replicates_: int = 5,
           decode_repeats: int = 1, freq_seed: Optional[int] = None) -> list[dict]:
    """Sketch time, decode time and Lloyd time as N grows with m fixed.

    The same frequency matrix and the same mixture means are used for every N,
    so only the sample size changes.
    """
    rows = []
    freq = None
    for N in Ns:
        data = gen_gmm(GmmGenConfig(K=K, n=n, N=N, seed=seed))
        if freq is None:
            sigma2 = estimate_sigma2(data.points[:SIGMA2_SUBSAMPLE], seed=seed)
            freq = sample_frequencies(FrequencySpec(Distribution.ADAPTED_RADIUS, sigma2,
                                                    seed if freq_seed is None else freq_seed), m, n)
        t0 = time.perf_counter()
        sketch = sketch_dataset(data, freq, shards=shards)
        sketch_ms = 1e3 * (time.perf_counter() - t0)
        runs = ckm_replicates(sketch, SolverConfig(K=K, seed=seed), decode_repeats, threads=1)
        decode_ms = float(np.median([r.wall_ms for r in runs]))
        lloyd = lloyd_replicates(data, K, lloyd_replicates_, seed=seed, threads=1)
        best = min(lloyd, key=lambda r: r.sse)
        rows.append({"N": N, "m": m, "K": K, "n": n, "sketch_ms": sketch_ms, "decode_ms": decode_ms,
                     "kmeans_ms_total": sum(r.wall_ms for r in lloyd),
                     "relative_sse": sse(data, runs[0].model) / best.sse})
    return rows
