import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spartan.core import (
    DataError,
    NumericError,
    RngStream,
    as_sample,
    as_stream,
    check_symmetric,
    default_ridge,
    derive_seed,
    empirical_covariance,
    sym_psd_sqrt,
)


def test_stream_is_reproducible():
    a = RngStream(42, 3).generator().random(5)
    b = RngStream(42, 3).generator().random(5)
    assert np.array_equal(a, b)


def test_streams_are_independent_by_id():
    a = RngStream(42, 3).generator().random(5)
    b = RngStream(42, 4).generator().random(5)
    assert not np.array_equal(a, b)


def test_spawn_extends_key():
    s = RngStream(1, 2).spawn(5, 6)
    assert s.key == (2, 5, 6)
    assert np.array_equal(s.generator().random(3), RngStream(1, (2, 5, 6)).generator().random(3))


def test_seed_range_checked():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)
    RngStream(2**64 - 1).generator().random()


def test_as_stream():
    assert as_stream(5) == RngStream(5)
    s = RngStream(5, 1)
    assert as_stream(s) is s
    with pytest.raises(TypeError):
        as_stream("5")


def test_derive_seed_deterministic_and_distinct():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)
    assert 0 <= derive_seed(9) < 2**64


def test_as_sample_shapes_and_errors():
    assert as_sample([1.0, 2.0]).shape == (2, 1)
    with pytest.raises(DataError):
        as_sample([[np.nan, 1.0]])
    with pytest.raises(DataError):
        as_sample([[np.inf]])
    with pytest.raises(DataError):
        as_sample(np.zeros((0, 2)))
    with pytest.raises(DataError):
        as_sample(np.zeros((2, 2, 2)))


def test_check_symmetric():
    with pytest.raises(DataError):
        check_symmetric([[1.0, 2.0], [2.0 + 1e-15, 1.0]])
    with pytest.raises(DataError):
        check_symmetric(np.ones((2, 3)))


def test_covariance_matches_numpy(gen):
    x = gen.standard_normal((200, 4)) @ gen.standard_normal((4, 4))
    S = empirical_covariance(x)
    np.testing.assert_allclose(S, np.cov(x, rowvar=False), rtol=1e-12, atol=1e-14)
    assert np.array_equal(S, S.T)


def test_covariance_needs_two_rows():
    with pytest.raises(DataError, match="insufficient rows"):
        empirical_covariance([[1.0, 2.0]])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10**6))
def test_psd_sqrt_squares_back(d, seed):
    g = np.random.default_rng(seed)
    A = g.standard_normal((d, d + 2))
    S = A @ A.T
    S = (S + S.T) / 2
    R = sym_psd_sqrt(S)
    assert np.array_equal(R, R.T)
    np.testing.assert_allclose(R @ R, S, atol=1e-9 * max(1.0, np.abs(S).max()))


def test_ridge_only_for_singular():
    assert default_ridge(np.eye(3)) == 0.0
    S = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert default_ridge(S) == pytest.approx(1e-10)
    assert default_ridge(np.zeros((2, 2))) == 0.0


def test_psd_sqrt_clamps_roundoff_negative():
    S = np.array([[1.0, 1.0], [1.0, 1.0]]) - 1e-17 * np.eye(2)
    R = sym_psd_sqrt(S)
    assert np.all(np.isfinite(R))


def test_error_hierarchy():
    assert issubclass(DataError, ValueError)
    assert issubclass(NumericError, ArithmeticError)
