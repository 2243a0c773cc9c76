import numpy as np
import pytest

from ckm import Bounds, CKMError, FrequencyMatrix, InitStrategy, SolverConfig, validate_dataset
from ckm.sketcher import PartialSketch, sketch_dataset, sketch_points
from ckm.core import Sketch
from ckm.solver import (
    AscentOptions,
    atom,
    atoms,
    ckm,
    ckm_solve,
    correlation,
    correlation_grad,
    global_descent,
    hard_threshold,
    maximize_c,
    nnls,
    nnls_real,
    pick_init,
    project_weights,
    sketch_cost,
    sketch_cost_grad,
)
from oracles import brute_force_nnls, central_diff, rel_err


def make_sketch(C, alpha, F, bounds):
    z = sketch_points(C, alpha, F)
    return Sketch(z, bounds, 1, F)


# -- atoms and correlation -------------------------------------------------

def test_atom_at_origin(gauss_freq):
    F = gauss_freq(12, 3)
    a = atom(np.zeros(3), F)
    np.testing.assert_array_equal(a, np.ones(12))
    assert np.linalg.norm(a) == pytest.approx(np.sqrt(12), rel=1e-15)


def test_atom_norm_is_sqrt_m(rng, gauss_freq):
    F = gauss_freq(300, 4)
    for _ in range(20):
        c = rng.standard_normal(4) * 10
        assert abs(np.linalg.norm(atom(c, F)) - np.sqrt(300)) <= 1e-12 * np.sqrt(300)


def test_atom_direct_value():
    F = FrequencyMatrix(np.array([[np.pi / 2]]))
    np.testing.assert_allclose(atom([1.0], F), [np.cos(np.pi / 2) - 1j * np.sin(np.pi / 2)], atol=1e-16)
    np.testing.assert_allclose(atom([1.0], F), [-1j], atol=1e-15)


def test_self_correlation_is_sqrt_m(rng, gauss_freq):
    F = gauss_freq(64, 3)
    c = rng.standard_normal(3)
    assert correlation(c, atom(c, F), F) == pytest.approx(np.sqrt(64), rel=1e-12)


def test_correlation_one_frequency():
    w, c_star = 1.3, 0.4
    F = FrequencyMatrix(np.array([[w]]))
    r = np.exp(-1j * w * np.array([c_star]))
    for c in np.linspace(-2, 2, 9):
        assert correlation(np.array([c]), r, F) == pytest.approx(np.cos(w * (c - c_star)), abs=1e-14)


def test_correlation_grad_finite_differences(rng, gauss_freq):
    for trial in range(100):
        n = int(rng.integers(1, 6))
        F = gauss_freq(int(rng.integers(5, 80)), n, seed=trial)
        c = rng.standard_normal(n)
        r = rng.standard_normal(F.m) + 1j * rng.standard_normal(F.m)
        fd = central_diff(lambda x: correlation(x, r, F), c)
        assert rel_err(correlation_grad(c, r, F), fd) <= 1e-5


def test_sketch_cost_grad_finite_differences(rng, gauss_freq):
    for trial in range(50):
        K, n = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        F = gauss_freq(int(rng.integers(10, 60)), n, seed=trial)
        C = rng.standard_normal((K, n))
        a = rng.random(K)
        z = rng.standard_normal(F.m) + 1j * rng.standard_normal(F.m)
        _, gC, ga = sketch_cost_grad(C, a, z, F)
        fdC = central_diff(lambda X: sketch_cost(X, a, z, F), C)
        fda = central_diff(lambda x: sketch_cost(C, x, z, F), a)
        assert rel_err(gC, fdC) <= 1e-5
        assert rel_err(ga, fda) <= 1e-5


# -- Step 1 ascent ---------------------------------------------------------

def test_maximize_recovers_planted_point(gauss_freq):
    F = gauss_freq(64, 2, seed=3)
    c_star = np.array([0.7, -1.1])
    r = atom(c_star, F)
    box = Bounds(np.array([-3.0, -3.0]), np.array([3.0, 3.0]))
    # grid-search oracle: c_star is the best point of the box
    g = np.linspace(-3, 3, 241)
    G = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    vals = np.real(np.exp(1j * G @ F.W.T) @ r)
    best = G[np.argmax(vals)]
    assert np.linalg.norm(best - c_star) <= np.sqrt(2) * (g[1] - g[0])
    radius = 0.1 / np.max(np.linalg.norm(F.W, axis=1))
    rng = np.random.default_rng(0)
    for _ in range(10):
        d = rng.standard_normal(2)
        init = c_star + radius * rng.random() * d / np.linalg.norm(d)
        c = maximize_c(init, r, F, box)
        assert np.linalg.norm(c - c_star) <= 1e-3
        assert correlation(c, r, F) >= correlation(init, r, F)


def test_maximize_zero_residual_returns_init(gauss_freq):
    F = gauss_freq(16, 3)
    init = np.array([0.2, 0.1, -0.3])
    box = Bounds(-np.ones(3), np.ones(3))
    np.testing.assert_array_equal(maximize_c(init, np.zeros(16, complex), F, box), init)


def test_maximize_stays_in_box(gauss_freq):
    F = gauss_freq(32, 2, seed=5)
    r = atom(np.array([5.0, 5.0]), F)  # optimum outside the box
    box = Bounds(np.zeros(2), np.ones(2))
    init = np.array([1.0, 1.0])
    c = maximize_c(init, r, F, box)
    assert box.contains(c)
    assert correlation(c, r, F) >= correlation(init, r, F)


# -- NNLS ------------------------------------------------------------------

def test_nnls_orthonormal_basis(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((6, 4)))
    coef = np.array([0.5, 0.0, 2.0, 1.25])
    np.testing.assert_allclose(nnls_real(Q, Q @ coef), coef, atol=1e-12)


def test_nnls_identity_clamps():
    np.testing.assert_allclose(nnls(np.eye(2).astype(complex), np.array([1.0, -1.0])), [1.0, 0.0])


def test_nnls_brute_force_complex(rng):
    for _ in range(20):
        cols = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
        t = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        A = np.vstack([cols.real, cols.imag])
        b = np.concatenate([t.real, t.imag])
        ref, _ = brute_force_nnls(A, b)
        np.testing.assert_allclose(nnls(cols, t), ref, atol=1e-8)


def test_nnls_kkt(rng):
    for _ in range(50):
        A = rng.standard_normal((12, 5))
        b = rng.standard_normal(12)
        x = nnls_real(A, b)
        grad = A.T @ (A @ x - b)
        assert np.all(x >= 0)
        assert np.all(grad >= -1e-8)
        assert np.max(np.abs(grad[x > 0]), initial=0) <= 1e-8


def test_nnls_rejects_nonfinite():
    with pytest.raises(CKMError):
        nnls_real(np.array([[np.nan]]), np.array([1.0]))


def test_nnls_duplicate_columns(rng):
    a = rng.standard_normal(6)
    x = nnls_real(np.column_stack([a, a]), 2 * a)
    assert x.sum() == pytest.approx(2.0)
    assert np.all(x >= 0)


# -- hard thresholding and weight projection -------------------------------

def test_hard_threshold_keeps_largest():
    C = np.arange(3.0)[:, None]
    kept, idx = hard_threshold(C, np.array([0.5, 0.1, 0.4]), 2)
    np.testing.assert_array_equal(idx, [0, 2])
    np.testing.assert_array_equal(kept[:, 0], [0, 2])


def test_hard_threshold_ties_to_lower_index():
    _, idx = hard_threshold(np.arange(4.0)[:, None], np.full(4, 0.25), 1)
    np.testing.assert_array_equal(idx, [0])
    _, idx = hard_threshold(np.arange(4.0)[:, None], np.array([0.1, 0.3, 0.3, 0.3]), 2)
    np.testing.assert_array_equal(idx, [1, 2])


def test_hard_threshold_identity_when_small():
    C = np.arange(3.0)[:, None]
    kept, idx = hard_threshold(C, np.array([0.1, 0.2, 0.3]), 3)
    np.testing.assert_array_equal(kept, C)
    kept, _ = hard_threshold(C, np.array([0.1, 0.2, 0.3]), 5)
    np.testing.assert_array_equal(kept, C)


def test_project_weights_exact_atom(gauss_freq):
    F = gauss_freq(20, 2)
    c = np.array([[0.3, 0.9]])
    box = Bounds(-np.ones(2), np.ones(2))
    np.testing.assert_allclose(project_weights(c, make_sketch(c, [1.0], F, box)), [1.0], atol=1e-12)


def test_project_weights_two_atoms(gauss_freq):
    F = gauss_freq(200, 2, seed=1)
    C = np.array([[-3.0, 0.0], [3.0, 1.0]])
    box = Bounds(np.full(2, -4.0), np.full(2, 4.0))
    sk = make_sketch(C, [0.3, 0.7], F, box)
    # oracle: NNLS on the explicitly built real system
    A = atoms(C, F).T
    ref, _ = brute_force_nnls(np.vstack([A.real, A.imag]), np.concatenate([sk.values.real, sk.values.imag]))
    alpha = project_weights(C, sk)
    np.testing.assert_allclose(alpha, ref, atol=1e-10)
    np.testing.assert_allclose(alpha, [0.3, 0.7], atol=1e-6)


def test_project_weights_nonnegative_on_noise(rng, gauss_freq):
    F = gauss_freq(50, 2)
    noise = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    assert np.all(project_weights(np.zeros((1, 2)), noise, F) >= 0)


# -- Step 5 descent --------------------------------------------------------

def test_descent_at_optimum_is_stationary(gauss_freq):
    F = gauss_freq(100, 2, seed=2)
    C = np.array([[-1.0, 0.5], [1.5, -0.5]])
    a = np.array([0.4, 0.6])
    z = sketch_points(C, a, F)
    box = Bounds(np.full(2, -3.0), np.full(2, 3.0))
    C2, a2 = global_descent(C, a, z, F, box, AscentOptions(max_iters=500))
    np.testing.assert_allclose(C2, C, atol=1e-10)
    np.testing.assert_allclose(a2, a, atol=1e-10)


def test_descent_never_increases_cost(rng, gauss_freq):
    for trial in range(100):
        n = int(rng.integers(1, 4))
        K = int(rng.integers(1, 4))
        F = gauss_freq(40, n, seed=trial)
        box = Bounds(np.full(n, -2.0), np.full(n, 2.0))
        z = sketch_points(rng.uniform(-2, 2, (K + 1, n)), rng.dirichlet(np.ones(K + 1)), F)
        C = rng.uniform(-2, 2, (K, n))
        a = rng.random(K)
        C2, a2 = global_descent(C, a, z, F, box, AscentOptions(max_iters=50))
        assert sketch_cost(C2, a2, z, F) <= sketch_cost(C, a, z, F) + 1e-12
        assert np.all(a2 >= 0) and np.all(C2 >= box.lower) and np.all(C2 <= box.upper)


# -- initialization --------------------------------------------------------

def test_range_init_degenerate_box():
    b = Bounds(np.array([1.0, -2.0]), np.array([1.0, -2.0]))
    np.testing.assert_array_equal(pick_init("range", b, np.zeros((0, 2)), None, np.random.default_rng(0)),
                                  [1.0, -2.0])


def test_range_init_inside_box():
    b = Bounds(np.array([0.0, -1.0]), np.array([2.0, 1.0]))
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert b.contains(pick_init(InitStrategy.RANGE, b, np.zeros((0, 2)), None, rng))


def test_sample_init_returns_row(rng):
    X = rng.standard_normal((20, 3))
    b = Bounds(X.min(0), X.max(0))
    for _ in range(20):
        c = pick_init("sample", b, np.zeros((0, 3)), X, rng)
        assert any(np.array_equal(c, row) for row in X)


def test_kpp_init_picks_other_point():
    X = np.array([[0.0, 0.0], [3.0, 4.0]])
    b = Bounds(X.min(0), X.max(0))
    # D^2 of the first point to C={x_0} is zero, so P(x_1) = 25 / 25 = 1
    rng = np.random.default_rng(0)
    for _ in range(50):
        np.testing.assert_array_equal(pick_init("kpp", b, X[:1], X, rng), X[1])


def test_kpp_init_distribution():
    X = np.array([[0.0], [1.0], [3.0]])
    b = Bounds(X.min(0), X.max(0))
    rng = np.random.default_rng(1)
    draws = [pick_init("kpp", b, X[:1], X, rng)[0] for _ in range(4000)]
    # D^2 = (0, 1, 9): P(1) = 0.1, P(3) = 0.9
    assert np.mean(np.array(draws) == 3.0) == pytest.approx(0.9, abs=0.02)
    assert 0.0 not in draws


@pytest.mark.parametrize("strategy", ["sample", "kpp"])
def test_data_inits_need_data(strategy):
    b = Bounds(np.zeros(1), np.ones(1))
    with pytest.raises(CKMError, match="requires data access"):
        pick_init(strategy, b, np.zeros((0, 1)), None, np.random.default_rng(0))


# -- full decoder ----------------------------------------------------------

def test_ckm_single_repeated_point(gauss_freq):
    x0 = np.array([0.7, -0.2])
    F = gauss_freq(20, 2)
    sk = sketch_dataset(np.tile(x0, (30, 1)), F)
    np.testing.assert_allclose(sk.values, atom(x0, F), rtol=1e-14)
    model = ckm(sk, SolverConfig(K=1))
    assert np.linalg.norm(model.centroids[0] - x0) <= 1e-3
    np.testing.assert_allclose(model.weights, [1.0])


def test_ckm_single_point_in_wider_box(gauss_freq):
    # Same sketch but a box much larger than the point: the ascent has to find it.
    x0 = np.array([0.7, -0.2])
    F = gauss_freq(20, 2, seed=4)
    z = atom(x0, F)
    box = Bounds(np.full(2, -1.0), np.full(2, 1.0))
    g = np.linspace(-1, 1, 201)
    G = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    assert np.linalg.norm(G[np.argmax(np.real(np.exp(1j * G @ F.W.T) @ z))] - x0) <= 0.015
    res = ckm_solve(Sketch(z, box, 1, F), SolverConfig(K=1, seed=3))
    assert np.linalg.norm(res.model.centroids[0] - x0) <= 1e-3
    np.testing.assert_allclose(res.model.weights, [1.0])


def test_ckm_requires_data_for_sample(gauss_freq):
    sk = sketch_dataset(np.zeros((3, 2)) + [[0], [1], [2]], gauss_freq(10, 2))
    with pytest.raises(CKMError, match="initialization requires data access"):
        ckm(sk, SolverConfig(K=1, init_strategy="sample"))


def _two_cluster_problem(seed=0):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(-5, 1, 5000), rng.normal(5, 1, 5000)])[:, None]
    return validate_dataset(X)


def test_ckm_two_1d_clusters():
    from ckm import Distribution, FrequencySpec, estimate_sigma2, sample_frequencies, sse
    from ckm.pipeline import best_lloyd

    data = _two_cluster_problem()
    F = sample_frequencies(FrequencySpec(Distribution.ADAPTED_RADIUS, estimate_sigma2(data), 0), 100, 1)
    sk = sketch_dataset(data, F)
    model = ckm(sk, SolverConfig(K=2))
    lloyd = best_lloyd(data, 2, replicates=5)
    ours = np.sort(model.centroids[:, 0])
    ref = np.sort(lloyd.model.centroids[:, 0])
    assert np.all(np.abs(ours - ref) <= 0.2)
    assert sse(data, model) / lloyd.sse <= 1.1


@pytest.mark.parametrize("init", ["range", "sample", "kpp"])
def test_ckm_invariants(init, gauss_freq):
    rng = np.random.default_rng(7)
    centers = np.array([[-4.0, 0.0], [4.0, 1.0], [0.0, 5.0]])
    X = centers[rng.integers(0, 3, 3000)] + rng.standard_normal((3000, 2))
    data = validate_dataset(X)
    F = gauss_freq(60, 2, sigma2=2.0, seed=1)
    sk = sketch_dataset(data, F)
    cfg = SolverConfig(K=3, init_strategy=init, seed=11)
    res = ckm_solve(sk, cfg, data, check_invariants=True)
    assert len(res.state.history) == 2 * 3
    assert res.model.K == 3
    assert np.all(res.model.centroids >= sk.bounds.lower) and np.all(res.model.centroids <= sk.bounds.upper)
    assert np.all(res.model.weights >= 0)
    assert res.model.weights.sum() == pytest.approx(1.0, abs=1e-9)
    # residual recomputed from scratch
    recomputed = sk.values - res.state.alpha @ atoms(res.state.support, F)
    assert np.max(np.abs(recomputed - res.state.residual)) <= 1e-9
    # determinism
    res2 = ckm_solve(sk, cfg, data)
    np.testing.assert_array_equal(res.model.centroids, res2.model.centroids)
    np.testing.assert_array_equal(res.model.weights, res2.model.weights)


def test_ckm_translation_covariance(gauss_freq):
    rng = np.random.default_rng(3)
    centers = np.array([[-3.0, 0.0], [3.0, 2.0]])
    X = centers[rng.integers(0, 2, 2000)] + 0.7 * rng.standard_normal((2000, 2))
    shift = np.array([1.7, -0.9])
    F = gauss_freq(80, 2, sigma2=1.0, seed=5)
    a = PartialSketch.empty(F).absorb(X).finalize()
    b = PartialSketch.empty(F).absorb(X + shift).finalize()
    # Each run gets an enlarged box; the second box is the first one shifted.
    margin = 2.0
    box_a = Bounds(a.bounds.lower - margin, a.bounds.upper + margin)
    box_b = Bounds(box_a.lower + shift, box_a.upper + shift)
    cfg = SolverConfig(K=2, seed=9)
    ma = ckm(Sketch(a.values, box_a, a.count, F), cfg)
    mb = ckm(Sketch(b.values, box_b, b.count, F), cfg)
    np.testing.assert_allclose(mb.centroids, ma.centroids + shift, atol=1e-3)
    np.testing.assert_allclose(mb.weights, ma.weights, atol=1e-3)


def test_ckm_translation_covariance_shared_box(gauss_freq):
    # One box covering both runs: the decoder must reach the same optimum anyway.
    rng = np.random.default_rng(4)
    centers = np.array([[-3.0, 0.0], [3.0, 2.0]])
    X = centers[rng.integers(0, 2, 2000)] + 0.7 * rng.standard_normal((2000, 2))
    shift = np.array([1.0, 0.5])
    F = gauss_freq(80, 2, seed=6)
    a = PartialSketch.empty(F).absorb(X).finalize()
    b = PartialSketch.empty(F).absorb(X + shift).finalize()
    box = a.bounds.union(b.bounds)
    box = Bounds(box.lower - 1, box.upper + 1)
    cfg = SolverConfig(K=2, seed=2)
    ma = ckm(Sketch(a.values, box, a.count, F), cfg)
    mb = ckm(Sketch(b.values, box, b.count, F), cfg)
    order_a = np.argsort(ma.centroids[:, 0])
    order_b = np.argsort(mb.centroids[:, 0])
    np.testing.assert_allclose(mb.centroids[order_b], ma.centroids[order_a] + shift, atol=1e-3)
