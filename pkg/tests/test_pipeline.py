import numpy as np
import pytest

from ckm import CentroidModel, CKMError, SolverConfig, select_best_replicate
from ckm.pipeline import Run, ckm_replicates, lloyd_replicates
from ckm.sketcher import sketch_dataset


def dummy(k):
    return CentroidModel(np.full((1, 1), float(k)), np.ones(1))


def test_single_run():
    r = Run(dummy(0), sketch_residual=0.3)
    assert select_best_replicate("ckm", [r]) is r


def test_ckm_selects_lowest_residual():
    runs = [Run(dummy(i), sketch_residual=v) for i, v in enumerate([0.5, 0.2, 0.9])]
    assert select_best_replicate("ckm", runs) is runs[1]


def test_ckm_ignores_sse():
    # SSE ordering disagrees with residual ordering; CKM must follow residuals.
    runs = [Run(dummy(0), sketch_residual=0.4, sse=1.0),
            Run(dummy(1), sketch_residual=0.1, sse=50.0)]
    assert select_best_replicate("ckm", runs) is runs[1]
    assert select_best_replicate("lloyd", runs) is runs[0]


def test_ties_go_to_first():
    runs = [Run(dummy(i), sse=1.0) for i in range(3)]
    assert select_best_replicate("lloyd", runs) is runs[0]


def test_errors():
    with pytest.raises(CKMError):
        select_best_replicate("ckm", [])
    with pytest.raises(CKMError):
        select_best_replicate("ckm", [Run(dummy(0), sse=1.0)])


def test_replicates_are_deterministic_and_seeded(gauss_freq):
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-3, 1, (300, 2)), rng.normal(3, 1, (300, 2))])
    sk = sketch_dataset(X, gauss_freq(40, 2, sigma2=2.0))
    cfg = SolverConfig(K=2, seed=5)
    a = ckm_replicates(sk, cfg, 3, threads=1)
    b = ckm_replicates(sk, cfg, 3, threads=3)
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra.model.centroids, rb.model.centroids)
    single = ckm_replicates(sk, SolverConfig(K=2, seed=6), 1)[0]
    np.testing.assert_array_equal(single.model.centroids, a[1].model.centroids)
    la = lloyd_replicates(X, 2, 3, seed=1)
    lb = lloyd_replicates(X, 2, 3, seed=1, threads=2)
    assert [r.sse for r in la] == [r.sse for r in lb]
