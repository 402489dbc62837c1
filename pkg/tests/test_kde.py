import math

import numpy as np
import pytest
from scipy import integrate, stats

from spartan.core import DataError, NumericError, RngStream
from spartan.kde import (
    BandwidthRule,
    bandwidth,
    fit_kde,
    hellinger_score,
    kde_eval,
    kde_model,
    loglog_slope,
    pointwise_mse,
    rule_exponent,
)
from spartan.synthetic import make_distribution


def double_loop_kde(x, z, H):
    r, d = x.shape
    Hinv = np.linalg.inv(H)
    c = 1.0 / (r * abs(np.linalg.det(H)) * (2 * math.pi) ** (d / 2))
    out = []
    for q in z:
        total = 0.0
        for p in x:
            w = Hinv @ (q - p)
            total += math.exp(-0.5 * float(w @ w))
        out.append(c * total)
    return np.array(out)


def product_kde(x, z, h):
    # product of 1-D Gaussian kernels with a common scalar bandwidth
    vals = np.ones((z.shape[0], x.shape[0]))
    for j in range(x.shape[1]):
        vals *= stats.norm.pdf((z[:, j, None] - x[None, :, j]) / h) / h
    return vals.mean(axis=1)


@pytest.mark.parametrize("seed", range(5))
def test_matches_double_loop(seed):
    g = np.random.default_rng(seed)
    d = 1 + seed % 3
    x = g.normal(size=(int(g.integers(1, 101)), d))
    A = g.normal(size=(d, d))
    H = A @ A.T + 0.5 * np.eye(d)
    H = (H + H.T) / 2
    z = g.normal(size=(30, d))
    got = kde_eval(kde_model(x, H), z)
    np.testing.assert_allclose(got, double_loop_kde(x, z, H), rtol=1e-12, atol=0)


def test_scalar_bandwidth_equals_product_form():
    g = np.random.default_rng(1)
    x, z = g.normal(size=(80, 3)), g.normal(size=(25, 3))
    got = kde_eval(kde_model(x, 0.4 * np.eye(3)), z)
    np.testing.assert_allclose(got, product_kde(x, z, 0.4), rtol=1e-12)


def test_mass_one_in_1d():
    g = np.random.default_rng(2)
    m = kde_model(g.normal(size=(40, 1)), np.array([[0.3]]))
    mass, _ = integrate.quad(lambda t: kde_eval(m, [[t]])[0], -12, 12, limit=400)
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_rule_factors():
    assert bandwidth("theorem1", 100, 2, np.eye(2))[0, 0] == pytest.approx(100 ** -0.25)
    assert bandwidth("scott", 100, 2, np.eye(2))[0, 0] == pytest.approx(100 ** (-1 / 6))
    S = np.array([[4.0, 0.0], [0.0, 9.0]])
    np.testing.assert_allclose(bandwidth("scott", 2, 2, S),
                               2 ** (-1 / 6) * np.diag([2.0, 3.0]), rtol=1e-14)
    assert rule_exponent("theorem1", 4) == -0.2
    with pytest.raises(ValueError):
        rule_exponent("fixed", 2)


def test_fixed_rule_and_validation():
    H = np.array([[0.5, 0.1], [0.1, 0.4]])
    assert np.array_equal(bandwidth(BandwidthRule("fixed", H), 10, 2), H)
    with pytest.raises(ValueError):
        BandwidthRule("fixed")
    with pytest.raises(NumericError):
        BandwidthRule("fixed", np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        BandwidthRule("silverman")


def test_singular_covariance_gets_ridge():
    S = np.array([[1.0, 1.0], [1.0, 1.0]])
    H = bandwidth("scott", 50, 2, S)
    assert np.linalg.eigvalsh(H)[0] > 0


def test_zero_covariance_is_numeric_failure():
    with pytest.raises(NumericError):
        bandwidth("scott", 10, 2, np.zeros((2, 2)))


def test_fit_kde_defaults_to_subsample_covariance():
    x = np.random.default_rng(3).normal(size=(60, 2))
    m = fit_kde(x, "scott")
    np.testing.assert_allclose(m.H, bandwidth("scott", 60, 2, np.cov(x, rowvar=False)), rtol=1e-10)


def test_hellinger_properties():
    p = np.array([0.1, 0.2, 0.3])
    assert hellinger_score(p, p) == 0.0
    assert hellinger_score(4 * p, p) == -1.0  # unclamped
    assert hellinger_score(np.zeros(3), p) == 1.0
    with pytest.raises(DataError):
        hellinger_score(p, np.array([0.1, 0.0, 0.3]))
    with pytest.raises(DataError):
        hellinger_score(p[:2], p)


def test_hellinger_near_zero_for_good_fit():
    spec = make_distribution("d1", 1)
    g = np.random.default_rng(5)
    x = g.normal(size=(5000, 1))
    z = g.normal(size=(2000, 1))
    from spartan.synthetic import density

    score = hellinger_score(kde_eval(fit_kde(x), z), density(spec, z))
    assert 0 <= score < 0.01


def test_pointwise_mse_uniform_shrinks_with_r():
    spec = make_distribution("d1", 2)
    mse_small, se = pointwise_mse(spec, "uniform", [0.0, 0.0], 2000, 20, "scott", 10, RngStream(1))
    mse_big, _ = pointwise_mse(spec, "uniform", [0.0, 0.0], 2000, 1000, "scott", 10, RngStream(1))
    assert mse_big < mse_small and se > 0


def test_loglog_slope_exact_power():
    r = np.array([10, 20, 40, 80])
    assert loglog_slope(r, 3.0 * r ** -0.7) == pytest.approx(-0.7, abs=1e-12)
