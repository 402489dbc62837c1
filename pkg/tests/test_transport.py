import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from spartan.core import DataError, RngStream
from spartan.transport import (
    EXACT_MAX_N,
    TransportConfig,
    assignment_cost,
    assignment_exact,
    ot_pair_1d,
    random_rotation,
    sliced_cost,
    transform_projection,
    transport,
)


def brute_min_cost(x, u):
    n = x.shape[0]
    return min(float(np.sum((x - u[list(p)]) ** 2)) for p in itertools.permutations(range(n)))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=6), st.integers(0, 10**6))
def test_pair_1d_is_optimal_by_enumeration(values, seed):
    a = np.array(values)
    b = np.random.default_rng(seed).normal(size=a.size)
    sigma = ot_pair_1d(a, b)
    assert sorted(sigma.tolist()) == list(range(a.size))
    assert assignment_cost(a, b, sigma) == pytest.approx(brute_min_cost(a[:, None], b[:, None]), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_pair_1d_matches_lsa(seed):
    g = np.random.default_rng(seed)
    n = int(g.integers(2, 129))
    a, b = g.standard_t(3, n), g.random(n)
    rows, cols = linear_sum_assignment((a[:, None] - b[None, :]) ** 2)
    ref = float(np.sum((a[rows] - b[cols]) ** 2))
    assert assignment_cost(a, b, ot_pair_1d(a, b)) == pytest.approx(ref, rel=1e-9)


def test_pair_1d_ties_keep_input_order():
    sigma = ot_pair_1d([1.0, 1.0, 0.0], [5.0, 6.0, 7.0])
    assert sigma.tolist() == [1, 2, 0]


def test_pair_1d_errors():
    with pytest.raises(DataError):
        ot_pair_1d([1.0, 2.0], [1.0])
    with pytest.raises(DataError):
        ot_pair_1d([np.nan], [1.0])


@pytest.mark.parametrize("seed", range(5))
def test_exact_assignment_matches_enumeration(seed):
    g = np.random.default_rng(seed)
    x, u = g.normal(size=(6, 2)), g.random((6, 2))
    sigma = assignment_exact(x, u)
    assert assignment_cost(x, u, sigma) == pytest.approx(brute_min_cost(x, u), rel=1e-12)


def test_exact_cap():
    x = np.zeros((EXACT_MAX_N + 1, 1))
    with pytest.raises(DataError, match="projection"):
        assignment_exact(x, x)


def test_rotation_is_orthogonal():
    Q = random_rotation(5, np.random.default_rng(0))
    np.testing.assert_allclose(Q.T @ Q, np.eye(5), atol=1e-12)


def test_sliced_cost_zero_on_identical_and_permuted():
    x = np.random.default_rng(1).normal(size=(50, 3))
    assert sliced_cost(x, x[::-1], 16, RngStream(0)) == pytest.approx(0.0, abs=1e-24)


@pytest.mark.parametrize("d", [2, 5])
def test_projection_reduces_cost(d):
    g = np.random.default_rng(d)
    x = g.normal(size=(3000, d)) * 3 + 2
    u = g.random((3000, d))
    res = transform_projection(x, u, TransportConfig(method="projection"), RngStream(4))
    assert res.final_cost <= res.initial_cost
    assert res.final_cost < 0.01 * res.initial_cost
    assert 1 <= res.iterations_run <= 64
    assert res.transformed.min() >= 0.0 and res.transformed.max() <= 1.0


def test_projection_one_dimensional_is_exact():
    g = np.random.default_rng(2)
    x, u = g.normal(size=(500, 1)), g.random((500, 1))
    res = transform_projection(x, u, TransportConfig(method="projection"), RngStream(0))
    sigma = ot_pair_1d(x[:, 0], u[:, 0])
    np.testing.assert_array_equal(res.transformed[:, 0], u[sigma, 0])


def test_projection_deterministic():
    g = np.random.default_rng(3)
    x, u = g.normal(size=(800, 3)), g.random((800, 3))
    cfg = TransportConfig(method="projection")
    a = transform_projection(x, u, cfg, RngStream(9)).transformed
    b = transform_projection(x, u, cfg, RngStream(9)).transformed
    assert np.array_equal(a, b)


def test_damped_steps_still_monotone():
    g = np.random.default_rng(6)
    x, u = g.normal(size=(600, 2)), g.random((600, 2))
    res = transform_projection(x, u, TransportConfig(method="projection", step_damping=0.3, tolerance=0.0,
                                                      max_iterations=10), RngStream(1))
    assert res.final_cost <= res.initial_cost
    assert res.iterations_run == 10


def test_exact_route_is_permutation_of_target():
    g = np.random.default_rng(7)
    x, u = g.normal(size=(200, 2)), g.random((200, 2))
    res = transport(x, u, TransportConfig(), RngStream(0))
    assert res.method == "exact"
    np.testing.assert_array_equal(np.sort(res.transformed, axis=0), np.sort(u, axis=0))
    assert res.final_cost == pytest.approx(0.0, abs=1e-30)


def test_identity_route():
    x = np.array([[-1.0, 0.5], [0.2, 2.0]])
    u = np.array([[0.1, 0.1], [0.9, 0.9]])
    res = transport(x, u, TransportConfig(max_iterations=0), RngStream(0))
    assert res.method == "identity"
    np.testing.assert_array_equal(res.transformed, [[0.0, 0.5], [0.2, 1.0]])
    assert res.initial_cost == res.final_cost


def test_auto_resolution():
    cfg = TransportConfig()
    assert cfg.resolve(EXACT_MAX_N) == "exact"
    assert cfg.resolve(EXACT_MAX_N + 1) == "projection"


@pytest.mark.parametrize("kwargs", [
    {"method": "sinkhorn"}, {"max_iterations": -1}, {"tolerance": -1.0},
    {"step_damping": 0.0}, {"step_damping": 1.5}, {"n_diagnostic_dirs": 0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        TransportConfig(**kwargs)


def test_shape_mismatch():
    with pytest.raises(DataError):
        transport(np.zeros((3, 2)), np.zeros((4, 2)))
