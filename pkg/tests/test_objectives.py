import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accel_ode.objectives import (balanced_start, gradient_check, log_sum_exp_from, logistic_from,
                                  make_log_sum_exp, make_logistic, make_problem, make_quadratic,
                                  make_scalar_quadratic, quadratic_from)


def test_one_dimensional_quadratic_is_half_square():
    obj = make_quadratic(1, 1.0, 1.0, seed=42)
    assert obj.minimizer == pytest.approx([0.0])
    assert obj.min_value == 0.0
    for x in (-2.0, 0.3, 5.0):
        assert obj.evaluate(np.array([x])) == pytest.approx(0.5 * x * x)


def test_quadratic_eigenvalues_hit_both_ends():
    obj = make_quadratic(2, 1.0, 10.0, seed=0)
    np.testing.assert_allclose(np.linalg.eigvalsh(obj.matrix), [1.0, 10.0], rtol=1e-12)


def test_quadratic_minimizer_matches_direct_solve():
    obj = make_quadratic(5, 0.5, 8.0, seed=7)
    xstar = np.linalg.solve(obj.matrix, obj.linear)
    np.testing.assert_allclose(obj.minimizer, xstar, rtol=1e-12, atol=1e-14)
    assert np.linalg.norm(obj.gradient(obj.minimizer)) <= 1e-10


def test_centered_quadratic_has_origin_minimizer():
    obj = make_quadratic(6, 0.1, 1.0, seed=3, centered=True)
    assert np.all(obj.minimizer == 0.0)
    assert obj.gap(np.zeros(6)) == 0.0


def test_logistic_symmetric_data_has_zero_minimizer():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((6, 3))
    y = np.where(rng.standard_normal(6) > 0, 1.0, -1.0)
    obj = logistic_from(np.vstack([z, -z]), np.concatenate([y, y]), reg=1.0)
    np.testing.assert_allclose(obj.minimizer, 0.0, atol=1e-14)


def test_logistic_constants_from_data():
    obj = make_logistic(50, 5, 0.1, seed=3)
    R = np.max(np.linalg.norm(obj.params["Z"], axis=1))
    assert obj.mu == 0.1
    assert obj.lipschitz == pytest.approx(R * R / 4 + 0.1, rel=1e-15)


def test_logistic_lipschitz_dominates_hessian(logistic):
    for x in (np.zeros(5), logistic.minimizer, np.ones(5)):
        top = np.linalg.eigvalsh(logistic.hessian(x))[-1]
        assert top <= logistic.lipschitz * (1 + 1e-12)
        assert np.linalg.eigvalsh(logistic.hessian(x))[0] >= logistic.mu * (1 - 1e-12)


def test_log_sum_exp_single_flat_piece_is_constant():
    obj = log_sum_exp_from(np.zeros((1, 3)), np.zeros(1), 1.0)
    for x in (np.zeros(3), np.array([1.0, -2.0, 3.0])):
        assert obj.evaluate(x) == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_array_equal(obj.gradient(x), 0.0)


def test_log_sum_exp_lipschitz_is_max_row_norm():
    obj = make_log_sum_exp(2, 1.0, seed=1)
    A = obj.params["A"]
    assert obj.lipschitz == pytest.approx(np.max(np.sum(A * A, axis=1)), rel=1e-15)
    assert obj.mu == 0.0


@pytest.mark.parametrize("name", ["logistic", "lse"])
def test_stored_minimizer_is_stationary(all_objectives, name):
    obj = all_objectives[name]
    assert np.linalg.norm(obj.gradient(obj.minimizer)) <= 1e-12


def test_gradient_check_examples(quad, logistic):
    res = gradient_check(quad, np.ones(10), tol=1e-6)
    assert res.passed and res.gradient_error <= 1e-8
    assert gradient_check(logistic, np.zeros(5), tol=1e-5).passed
    lse = make_log_sum_exp(5, 1.0, seed=0)
    far = np.full(5, 1e3 / np.sqrt(5))
    assert np.isfinite(lse.evaluate(far))
    assert gradient_check(lse, far, tol=1e-5).passed


def test_gradient_check_flags_wrong_gradient(quad):
    broken = quadratic_from(quad.matrix, quad.linear, quad.mu, quad.lipschitz)
    object.__setattr__(broken, "gradient", lambda x: 1.01 * (quad.matrix @ x - quad.linear))
    assert not gradient_check(broken, np.ones(10), tol=1e-6).passed


def test_gradient_check_on_hundred_points_per_objective(all_objectives):
    rng = np.random.default_rng(2024)
    for name, obj in all_objectives.items():
        for _ in range(100):
            x = obj.minimizer + rng.standard_normal(obj.dimension) * rng.choice([0.1, 1.0, 5.0])
            res = gradient_check(obj, x, tol=1e-5)
            assert res.passed, (name, x, res)


def test_quadratic_gap_is_centered_form(quad, rng):
    for _ in range(50):
        x = quad.minimizer + rng.standard_normal(10) * 3
        d = x - quad.minimizer
        expected = 0.5 * d @ quad.matrix @ d
        assert quad.gap(x) == pytest.approx(expected, rel=1e-12)


def _pairs(obj, rng, n=1000):
    X = obj.minimizer + rng.standard_normal((n, obj.dimension)) * 2
    Y = X + rng.standard_normal((n, obj.dimension)) * rng.choice([1e-2, 1.0, 3.0], size=(n, 1))
    return X, Y


def test_strong_convexity_and_smoothness(all_objectives):
    rng = np.random.default_rng(7)
    for name, obj in all_objectives.items():
        X, Y = _pairs(obj, rng)
        for x, y in zip(X, Y):
            fx, fy = obj.evaluate(x), obj.evaluate(y)
            lin = fx + obj.gradient(x) @ (y - x)
            dd = (y - x) @ (y - x)
            scale = 1e-9 * (1 + abs(fy) + abs(lin))
            assert fy >= lin + 0.5 * obj.mu * dd - scale, name
            assert fy <= lin + 0.5 * obj.lipschitz * dd + scale, name


def test_data_generation_is_deterministic():
    a = make_quadratic(4, 0.1, 2.0, seed=11)
    b = make_quadratic(4, 0.1, 2.0, seed=11)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    np.testing.assert_array_equal(a.linear, b.linear)
    c = make_quadratic(4, 0.1, 2.0, seed=12)
    assert not np.array_equal(a.linear, c.linear)


def test_balanced_start_spreads_gap_evenly(quad):
    x0 = balanced_start(quad, gap=2.0)
    assert quad.gap(x0) == pytest.approx(2.0, rel=1e-12)
    w, U = np.linalg.eigh(quad.matrix)
    z = U.T @ (x0 - quad.minimizer)
    np.testing.assert_allclose(0.5 * w * z * z, 2.0 / 10, rtol=1e-10)


def test_balanced_start_rejects_non_quadratic(lse):
    with pytest.raises(ValueError):
        balanced_start(lse)


def test_problem_default_start_and_distance(quad):
    pb = make_problem(quad)
    assert pb.dist_sq == pytest.approx(10.0, rel=1e-12)
    with pytest.raises(ValueError):
        make_problem(quad, np.zeros(3))


@pytest.mark.parametrize("args", [(0, 0.1, 1.0), (3, 0.0, 1.0), (3, 2.0, 1.0)])
def test_quadratic_rejects_bad_parameters(args):
    with pytest.raises(ValueError):
        make_quadratic(*args)


def test_scalar_quadratic_curvature():
    obj = make_scalar_quadratic(3.0)
    assert obj.gradient(np.array([2.0])) == pytest.approx([6.0])
    assert obj.mu == obj.lipschitz == 3.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=5, max_size=5))
def test_lse_gap_nonnegative_and_finite(xs):
    obj = make_log_sum_exp(5, 1.0, seed=0)
    g = obj.gap(np.array(xs))
    assert np.isfinite(g) and g >= -1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=5, max_size=5))
def test_logistic_gap_matches_direct_difference(xs):
    obj = make_logistic(50, 5, 0.01, seed=0)
    x = np.array(xs)
    direct = obj.evaluate(x) - obj.min_value
    assert obj.gap(x) == pytest.approx(direct, rel=1e-9, abs=1e-12)
