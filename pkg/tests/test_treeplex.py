import numpy as np
import pytest

from lrloftrl import smpl as S
from lrloftrl import treeplex as tp

from oracles import enumerate_vertices, in_treeplex, kkt_prox, prox_value


def random_instances(seed, count):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        node = tp.random_treeplex(rng)
        d = node.dim
        yield node, rng.uniform(-2, 2, d), rng.uniform(0.2, 2, d), rng


def central_difference(node, g, w, t, h=1e-4):
    return (prox_value(node, g, w, t + h) - prox_value(node, g, w, t - h)) / (2 * h)


# -- structure ----------------------------------------------------------------

def test_simplex_is_branch_over_empty_children():
    s = tp.simplex(3)
    assert isinstance(s, tp.Branch) and s.children == (None, None, None) and s.dim == 3


def test_layout_places_children_after_branch_coordinates():
    node = tp.branch(tp.simplex(2), None)
    assert node.dim == 4
    assert in_treeplex(node, np.array([0.4, 0.6, 0.1, 0.3]))
    assert not in_treeplex(node, np.array([0.4, 0.6, 0.3, 0.3]))


def test_vertices_match_brute_force():
    for node, _, _, _ in random_instances(3, 30):
        ours = {tuple(v) for v in tp.vertices(node)}
        ref = {tuple(v) for v in enumerate_vertices(node)}
        assert ours == ref


def test_json_roundtrip():
    obj = {"product": [{"simplex": 2}, {"branch": {"k": 2, "children": [{"simplex": 3}, None]}}]}
    node = tp.from_json(obj)
    assert node.dim == 2 + 2 + 3
    assert tp.from_json(tp.to_json(node)) == node


def test_structural_errors_detect_overlapping_ranges():
    obj = {"product": [{"simplex": 2, "range": [0, 2]}, {"simplex": 2, "range": [1, 3]}]}
    errors = tp.structural_errors(obj)
    assert errors and "range" in errors[0]


def test_structural_errors_empty_for_valid_ranges():
    obj = {"product": [{"simplex": 2, "range": [0, 2]}, {"simplex": 2, "range": [2, 4]}]}
    assert tp.structural_errors(obj) == []


def test_malformed_json_is_reported():
    assert tp.structural_errors({"cube": 3})


# -- lambda derivative --------------------------------------------------------

def test_lambda_single_coordinate():
    gamma, omega = 0.7, 1.3
    lam = tp.lambda_derivative(tp.simplex(1), [gamma], [omega])
    for t in np.linspace(0.1, 3, 7):
        assert S.smpl_eval(lam, t) == pytest.approx(-gamma + t / omega ** 2, abs=1e-12)
        fd = central_difference(tp.simplex(1), [gamma], [omega], t)
        assert S.smpl_eval(lam, t) == pytest.approx(fd, abs=1e-6)


def test_lambda_symmetric_simplex():
    lam = tp.lambda_derivative(tp.simplex(2), [0, 0], [1, 1])
    for t in np.linspace(0.1, 3, 7):
        assert S.smpl_eval(lam, t) == pytest.approx(t / 2, abs=1e-12)
        assert S.smpl_eval(lam, t) == pytest.approx(
            central_difference(tp.simplex(2), np.zeros(2), np.ones(2), t), abs=1e-6)


def test_lambda_rejects_nonpositive_center():
    with pytest.raises(ValueError):
        tp.lambda_derivative(tp.simplex(2), [0, 0], [1, 0])


def _away_from_breakpoints(rep, t, margin=2e-4):
    return all(abs(t - b) > margin for b in rep.betas)


def test_lambda_matches_central_differences_on_random_treeplexes():
    checked = 0
    for node, g, w, rng in random_instances(11, 25):
        lam = tp.lambda_derivative(node, g, w)
        for t in rng.uniform(0.05, 2.0, 20):
            if not _away_from_breakpoints(lam, t):
                continue
            assert S.smpl_eval(lam, t) == pytest.approx(central_difference(node, g, w, t), abs=1e-5)
            checked += 1
    assert checked > 400


def test_lambda_is_strictly_increasing_and_small():
    for node, g, w, _ in random_instances(5, 200):
        lam = tp.lambda_derivative(node, g, w)
        assert lam.is_strict
        assert lam.size <= node.dim
        ts = np.linspace(0, 5, 200)
        assert np.all(np.diff(S.smpl_eval(lam, ts)) > 0)


# -- prox and reconstruction --------------------------------------------------

def test_prox_at_origin_when_gradient_vanishes():
    t, x = tp.prox_argmin(tp.simplex(2), [0, 0], [1, 1])
    assert t == 0 and np.all(x == 0)


def test_prox_uniform_gradient():
    g, w = np.ones(2), np.ones(2)
    t, x = tp.prox_argmin(tp.simplex(2), g, w)
    assert t == 1 and np.allclose(x, [0.5, 0.5], atol=1e-12)
    assert tp.prox_objective(g, w, x) == pytest.approx(-0.75, abs=1e-12)
    grid = _grid_scaled_simplex(g, w)
    assert tp.prox_objective(g, w, x) <= grid[0] + 1e-12
    assert np.allclose(x, grid[1], atol=1e-3)


def test_prox_single_coordinate_gradient():
    g, w = np.array([1.0, 0.0]), np.ones(2)
    t, x = tp.prox_argmin(tp.simplex(2), g, w)
    assert t == 1 and np.allclose(x, [1, 0], atol=1e-12)
    assert tp.prox_objective(g, w, x) == pytest.approx(-0.5, abs=1e-12)
    grid = _grid_scaled_simplex(g, w)
    assert np.allclose(x, grid[1], atol=1e-3)


def _grid_scaled_simplex(g, w, h=1e-3):
    # all points (a, b) with a, b >= 0 and a + b <= 1 on a 1e-3 lattice
    best = (np.inf, None)
    a = np.arange(0, 1 + h / 2, h)
    A, B = np.meshgrid(a, a, indexing="ij")
    mask = A + B <= 1 + 1e-12
    vals = -g[0] * A - g[1] * B + 0.5 * ((A / w[0]) ** 2 + (B / w[1]) ** 2)
    vals[~mask] = np.inf
    k = np.unravel_index(np.argmin(vals), vals.shape)
    best = (vals[k], np.array([A[k], B[k]]))
    return best


def test_reconstruct_examples():
    assert np.all(tp.reconstruct(tp.simplex(2), [1, 1], [1, 1], 0) == 0)
    assert np.allclose(tp.reconstruct(tp.simplex(2), [1, 1], [1, 1], 1), [0.5, 0.5], atol=1e-12)


def test_reconstruct_negative_scale_raises():
    with pytest.raises(ValueError):
        tp.reconstruct(tp.simplex(2), [1, 1], [1, 1], -1)


def test_reconstruct_is_feasible_and_optimal():
    for node, g, w, rng in random_instances(17, 100):
        t = float(rng.uniform(0, 2))
        x = tp.reconstruct(node, g, w, t)
        assert tp.residual(node, x, t) <= 1e-9
        assert in_treeplex(node, x, t)
        ref_val, ref_x = kkt_prox(node, g, w, t)
        assert tp.prox_objective(g, w, x) == pytest.approx(ref_val, abs=1e-10)
        assert np.allclose(x, ref_x, atol=1e-8)


def test_prox_matches_exact_oracle_over_scaled_set():
    for node, g, w, _ in random_instances(23, 40):
        t, x = tp.prox_argmin(node, g, w)
        # the value function is convex in the scale: golden-section search on the exact oracle
        a, b = 0.0, 1.0
        r = (np.sqrt(5) - 1) / 2
        for _ in range(60):
            c, d = b - r * (b - a), a + r * (b - a)
            if prox_value(node, g, w, c) <= prox_value(node, g, w, d):
                b = d
            else:
                a = c
        best = min(prox_value(node, g, w, s) for s in (0.0, 1.0, (a + b) / 2))
        assert tp.prox_objective(g, w, x) <= best + 1e-12
        assert 0 <= t <= 1


def test_project_is_euclidean_projection():
    rng = np.random.default_rng(2)
    node = tp.product(tp.simplex(2), tp.branch(tp.simplex(2), None))
    V = enumerate_vertices(node)
    for _ in range(20):
        z = rng.normal(size=node.dim)
        p = tp.project(node, z)
        assert in_treeplex(node, p)
        # no vertex direction improves the distance (first-order optimality)
        assert np.all((V - p) @ (z - p) <= 1e-9)


# -- linear maximization ------------------------------------------------------

def test_lmo_examples():
    assert np.array_equal(tp.lmo(tp.simplex(2), [2, 1]), [1, 0])
    assert np.array_equal(tp.lmo(tp.simplex(2), [1, 1]), [1, 0])


def test_lmo_matches_vertex_enumeration():
    for node, g, _, _ in random_instances(29, 50):
        V = enumerate_vertices(node)
        assert tp.lmo(node, g) @ g == pytest.approx((V @ g).max(), abs=1e-12)
