import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tactrack.optim import NonFiniteObjective, OptimizerConfig, gradient_check, minimize

# A larger step than the tracker default: these problems start O(1) away
# from their minimum and Adam moves roughly learning_rate per iteration.
FAST = OptimizerConfig(learning_rate=0.1)


def spd_problem(seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(6, 6))
    a = m @ m.T + np.eye(6)
    b = rng.normal(size=6)
    return a, b, np.linalg.solve(a, b)


def test_quadratic_examples():
    r = minimize(lambda x: float(x @ x), [1.0, 1.0], config=FAST)
    assert np.max(np.abs(r.x)) < 1e-4
    r = minimize(lambda x: float((x[0] - 3.0) ** 2), [0.0], config=FAST)
    assert abs(r.x[0] - 3.0) < 1e-4


def test_spd_quadratic_matches_closed_form():
    a, b, xs = spd_problem(7)
    r = minimize(lambda x: 0.5 * x @ a @ x - b @ x, np.zeros(6), lambda x: a @ x - b, FAST)
    assert np.max(np.abs(r.x - xs)) < 1e-3
    assert r.iterations <= 200


def test_finite_difference_and_value_gradient_forms_agree():
    a, b, _ = spd_problem(3)
    f = lambda x: 0.5 * x @ a @ x - b @ x
    g = lambda x: a @ x - b
    r1 = minimize(f, np.zeros(6), None, FAST)
    r2 = minimize(lambda x: (f(x), g(x)), np.zeros(6), True, FAST)
    assert np.allclose(r1.x, r2.x, atol=1e-5)


def test_gradient_check_examples():
    f = lambda x: float(x @ x)
    x = np.array([1.0, 2.0, 3.0])
    assert gradient_check(f, lambda x: 2 * x, x) < 1e-7
    assert gradient_check(f, lambda x: 3 * x, x) == pytest.approx(0.5, abs=1e-6)


def test_non_finite_objective_raises():
    with pytest.raises(NonFiniteObjective):
        minimize(lambda x: float("nan"), [0.0], lambda x: x)
    with pytest.raises(NonFiniteObjective):
        minimize(lambda x: 1.0 / x[0] if x[0] < 0.005 else np.inf, [0.0001], lambda x: np.array([-1.0]))


def test_deterministic_iterates():
    a, b, _ = spd_problem(11)
    f = lambda x: 0.5 * x @ a @ x - b @ x
    r1 = minimize(f, np.ones(6))
    r2 = minimize(f, np.ones(6))
    assert np.array_equal(r1.x, r2.x) and r1.fun == r2.fun and r1.iterations == r2.iterations


def test_stops_early_once_settled():
    r = minimize(lambda x: float(x @ x) + 1.0, [1e-3], lambda x: 2 * x, OptimizerConfig(max_iterations=10_000))
    assert r.iterations < 10_000


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 0.5))
def test_best_seen_never_worse_than_start(seed, lr):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=4)
    f = lambda x: float(np.sum(np.cos(3 * x)) + 0.1 * x @ x)
    r = minimize(f, x0, config=OptimizerConfig(learning_rate=lr, max_iterations=50))
    assert r.fun <= f(x0)
    assert r.fun == f(r.x)


def test_config_validation():
    for bad in ({"learning_rate": 0}, {"beta1": 1.0}, {"beta2": -0.1}, {"max_iterations": 0}):
        with pytest.raises(ValueError):
            OptimizerConfig(**bad)
