import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochnewton.cubic import (CubicModel, cube_penalty, l3_expansion_valid, l3_penalty_eval, l3_sums,
                               prox_cubic, prox_penalty, power_iteration_lmax, single_anchor_residual,
                               solve_multi_anchor, solve_single_anchor)
from stochnewton.errors import NonConvergenceError, ValidationError

from conftest import fd_gradient, fd_jacobian
from oracles import cubic_objective, grid_polish_minimum, prox_cubic_by_ray

ROOT = (1 - math.sqrt(13)) / 6  # negative root of 1 + y - 3 y^2 = 0


def prox_residual(x, v, w, sigma):
    u = x - w
    return np.linalg.norm(3 * sigma * np.linalg.norm(u) * u + (x - v))


def test_prox_at_kink():
    w = np.array([1.0, -2.0])
    np.testing.assert_array_equal(prox_cubic(w, w, 0.3), w)


def test_prox_scalar_example():
    np.testing.assert_allclose(prox_cubic(np.array([2.0, 0.0]), np.zeros(2), 1 / 3), [1.0, 0.0], rtol=1e-15)


def test_prox_validation():
    with pytest.raises(ValidationError):
        prox_cubic(np.zeros(2), np.ones(2), 0.0)


@given(st.integers(0, 100_000))
def test_prox_matches_ray_search(seed):
    r = np.random.default_rng(seed)
    d = r.integers(1, 6)
    v, w = r.standard_normal(d) * 5, r.standard_normal(d)
    sigma = 10 ** r.uniform(-3, 3)
    x = prox_cubic(v, w, sigma)
    np.testing.assert_allclose(x, prox_cubic_by_ray(v, w, sigma), atol=1e-8)


def test_prox_residual_bulk():
    r = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10_000):
        d = r.integers(1, 8)
        v, w = r.standard_normal(d) * 10 ** r.uniform(-3, 3), r.standard_normal(d)
        sigma = 10 ** r.uniform(-4, 4)
        worst = max(worst, prox_residual(prox_cubic(v, w, sigma), v, w, sigma))
    assert worst <= 1e-10


def test_single_anchor_examples():
    # model gradient at the anchor is g + H w = 0
    w = np.array([1.0, 2.0])
    assert solve_single_anchor(-w, np.eye(2), w, 3.0).tolist() == [1.0, 2.0]
    y = solve_single_anchor(np.array([1.0]), np.array([[1.0]]), np.zeros(1), 6.0)
    assert y[0] == pytest.approx(ROOT, rel=1e-14)
    assert y[0] == pytest.approx(-0.434259, abs=1e-6)


def test_single_anchor_vanishing_regularization():
    r = np.random.default_rng(1)
    G = r.standard_normal((4, 4))
    H = G @ G.T + np.eye(4)
    g = r.standard_normal(4)
    w = r.standard_normal(4)
    gt = g + H @ w
    x = solve_single_anchor(g, H, w, 1e-8)
    np.testing.assert_allclose(x - w, -np.linalg.solve(H, gt), atol=1e-6)


def test_single_anchor_rejects_indefinite():
    with pytest.raises(ValidationError):
        solve_single_anchor(np.ones(2), np.diag([1.0, -1.0]), np.zeros(2), 1.0)
    with pytest.raises(ValidationError):
        solve_single_anchor(np.ones(2), np.eye(2), np.zeros(2), 0.0)


def test_single_anchor_stationarity_bulk():
    r = np.random.default_rng(2)
    tol = 1e-12
    for _ in range(1000):
        d = int(r.integers(1, 21))
        G = r.standard_normal((d, d + 2)) * 10 ** r.uniform(-2, 2)
        # include singular PSD matrices
        H = G @ G.T if r.random() < 0.7 else G[:, :1] @ G[:, :1].T
        g, w = r.standard_normal(d) * 10 ** r.uniform(-3, 3), r.standard_normal(d)
        M = 10 ** r.uniform(-3, 3)
        x = solve_single_anchor(g, H, w, M, tol)
        scale = 1 + np.linalg.norm(g + H @ w)
        assert single_anchor_residual(g, H, w, M, x) <= 1e3 * tol * scale * max(1.0, np.linalg.norm(H, 2))


def test_single_anchor_monotone_in_M():
    H, g, w = np.diag([1.0, 3.0]), np.array([2.0, -1.0]), np.zeros(2)
    steps = [np.linalg.norm(solve_single_anchor(g, H, w, M) - w) for M in (0.1, 1, 10, 100, 1000)]
    assert all(a > b for a, b in zip(steps, steps[1:]))


def test_l3_eval_example():
    sums = l3_sums(np.zeros((1, 2)))
    value, grad = l3_penalty_eval(np.array([1.0, -2.0]), sums, 6.0)
    assert value == 9.0
    np.testing.assert_array_equal(grad, [3.0, -12.0])


def test_l3_eval_zero_at_nonnegative_anchor():
    w = np.array([[0.5, 2.0, 0.0]])
    value, grad = l3_penalty_eval(w[0], l3_sums(w), 6.0)
    assert value == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(grad, 0.0, atol=1e-14)


@given(st.integers(0, 10_000))
def test_l3_eval_matches_direct_sum_where_expansion_is_valid(seed):
    r = np.random.default_rng(seed)
    W = r.uniform(0, 2, size=(4, 3))
    x = W.max(axis=0) + r.uniform(0, 2, size=3)
    assert l3_expansion_valid(x, W)
    value, grad = l3_penalty_eval(x, l3_sums(W), 6.0)
    direct, dgrad, _ = cube_penalty(x, W, "l3")
    assert value == pytest.approx(direct, rel=1e-12)
    np.testing.assert_allclose(grad, dgrad, rtol=1e-12)


@pytest.mark.xfail(strict=True, reason="the sum expansion drops absolute values; it equals the direct "
                                       "penalty only when x_j >= w_ij >= 0 for every anchor")
def test_l3_eval_matches_direct_sum_at_arbitrary_points():
    r = np.random.default_rng(0)
    W, x = r.standard_normal((3, 4)), r.standard_normal(4)
    assert l3_penalty_eval(x, l3_sums(W), 6.0)[0] == pytest.approx(cube_penalty(x, W, "l3")[0], rel=1e-12)


def test_l3_expansion_counterexample():
    # x = 0, w = 1: the expansion gives -1 while |0 - 1|^3 = 1
    value, _ = l3_penalty_eval(np.zeros(1), l3_sums(np.ones((1, 1))), 6.0)
    assert value == -1.0
    assert not l3_expansion_valid(np.zeros(1), np.ones((1, 1)))


@pytest.mark.parametrize("mode", ["l2", "l3"])
def test_cube_penalty_derivatives(mode, rng):
    W = rng.standard_normal((4, 3))
    x = rng.standard_normal(3)
    v, g, h = cube_penalty(x, W, mode)
    np.testing.assert_allclose(fd_gradient(lambda z: cube_penalty(z, W, mode)[0], x), g, atol=1e-6)
    np.testing.assert_allclose(fd_jacobian(lambda z: cube_penalty(z, W, mode)[1], x), h, atol=1e-5)


def test_multi_anchor_collapses_to_single(rng):
    G = rng.standard_normal((3, 3))
    H = G @ G.T
    g, w = rng.standard_normal(3), rng.standard_normal(3)
    model = CubicModel(g, H, np.tile(w, (4, 1)), 2.0)
    tol = 1e-9
    np.testing.assert_allclose(solve_multi_anchor(model, tol=tol), solve_single_anchor(g, H, w, 2.0),
                               atol=10 * tol)
    for method in ("newton", "prox_grad"):
        # a tiny perturbation forces the general path
        W = np.tile(w, (4, 1)) + 1e-13 * rng.standard_normal((4, 3))
        x = solve_multi_anchor(CubicModel(g, H, W, 2.0), tol=tol, method=method)
        np.testing.assert_allclose(x, solve_single_anchor(g, H, w, 2.0), atol=1e-6)


@pytest.mark.parametrize("method", ["newton", "prox_grad"])
def test_multi_anchor_symmetric_instance(method):
    model = CubicModel(np.zeros(1), np.eye(1), np.array([[-1.0], [1.0]]), 6.0)
    assert abs(solve_multi_anchor(model, tol=1e-9, method=method)[0]) <= 1e-9


@pytest.mark.parametrize("mode", ["l2", "l3"])
@pytest.mark.parametrize("method", ["newton", "prox_grad"])
def test_multi_anchor_against_grid_oracle(mode, method):
    r = np.random.default_rng(42)
    for _ in range(8):
        d, n = int(r.integers(1, 4)), int(r.integers(1, 6))
        G = r.standard_normal((d, d))
        H = G @ G.T * r.uniform(0.1, 3)
        g, W, M = r.standard_normal(d), r.standard_normal((n, d)), 10 ** r.uniform(-1, 1)
        x = solve_multi_anchor(CubicModel(g, H, W, M, mode=mode), tol=1e-10, method=method)
        _, best = grid_polish_minimum(g, H, W, M, mode)
        assert cubic_objective(x, g, H, W, M, mode) <= best + 1e-6


@given(st.integers(0, 10_000), st.sampled_from(["l2", "l3"]))
def test_multi_anchor_never_worse_than_best_anchor(seed, mode):
    r = np.random.default_rng(seed)
    d, n = 3, 4
    G = r.standard_normal((d, d))
    model = CubicModel(r.standard_normal(d), G @ G.T, r.standard_normal((n, d)), 10 ** r.uniform(-2, 2),
                       mode=mode)
    x = solve_multi_anchor(model)
    assert model.objective(x) <= min(model.objective(w) for w in model.anchors) + 1e-12
    assert np.linalg.norm(model.gradient(x)) <= 1e-9 * (1 + np.linalg.norm(model.g)) * 10


@given(st.integers(0, 10_000))
def test_l3_prox_first_order(seed):
    r = np.random.default_rng(seed)
    W, v, sigma = r.standard_normal((3, 4)), r.standard_normal(4) * 3, 10 ** r.uniform(-2, 2)
    z = prox_penalty(v, W, sigma, "l3")
    res = 3 * sigma * (np.abs(z - W) * (z - W)).mean(axis=0) + (z - v)
    assert np.max(np.abs(res)) <= 1e-9 * (1 + np.abs(v).max())


def test_model_validation():
    with pytest.raises(ValidationError):
        CubicModel(np.zeros(2), np.eye(2), np.zeros((1, 2)), 0.0)
    with pytest.raises(ValidationError):
        CubicModel(np.zeros(3), np.eye(2), np.zeros((1, 2)), 1.0)
    with pytest.raises(ValidationError):
        CubicModel(np.zeros(2), np.eye(2), np.zeros((1, 2)), 1.0, mode="l1")


def test_multi_anchor_iteration_budget():
    model = CubicModel(np.array([5.0, -3.0]), np.diag([100.0, 1e-3]), np.array([[0.0, 0.0], [4.0, 4.0]]), 1e-3)
    with pytest.raises(NonConvergenceError) as info:
        solve_multi_anchor(model, tol=1e-14, max_iter=2, method="prox_grad")
    assert info.value.residual is not None and info.value.best is not None


def test_power_iteration():
    H = np.diag([1.0, 5.0, 2.0])
    assert power_iteration_lmax(H, rounds=60) == pytest.approx(5.0, rel=1e-6)
    assert power_iteration_lmax(np.zeros((2, 2))) == 0.0
