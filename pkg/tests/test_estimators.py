import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tlportfolio.errors import InputError
from tlportfolio.estimators import (
    GaussianMoments,
    block_moments,
    default_pd_floor,
    ensure_positive_definite,
    expanding_moments,
    repaired,
)
from tlportfolio.panel import ReturnMatrix


def col(*xs):
    return ReturnMatrix("x", np.array(xs, dtype=float).reshape(-1, 1))


def test_expanding_two_rows():
    m = expanding_moments(col(1, 3), 2, 3)
    assert m.mean[0] == 2.0 and m.cov[0, 0] == 2.0 and m.n_obs == 2


def test_expanding_constant_series():
    data = ReturnMatrix("c", np.full((6, 3), 0.7))
    m = expanding_moments(data, 6, 7)
    np.testing.assert_allclose(m.mean, 0.7)
    np.testing.assert_allclose(m.cov, np.zeros((3, 3)), atol=1e-15)


def test_expanding_longer_source_prefix():
    # N_m=4, n_tilde=2, t=2 uses the first 3 rows
    m = expanding_moments(col(1, 2, 3, 4), 2, 2)
    assert m.n_obs == 3 and m.mean[0] == 2.0 and m.cov[0, 0] == pytest.approx(1.0)


def test_expanding_range_errors():
    with pytest.raises(InputError):
        expanding_moments(col(1, 2, 3), 3, 5)
    with pytest.raises(InputError):
        expanding_moments(col(1, 2, 3), 3, 2)  # only one row before t=2


def test_block_last_two():
    m = block_moments(col(1, 2, 3, 4), 4, 5, 2)
    assert m.mean[0] == 3.5 and m.cov[0, 0] == pytest.approx(0.5)


def test_block_equals_expanding_on_full_prefix():
    rng = np.random.default_rng(3)
    data = ReturnMatrix("x", rng.normal(size=(12, 3)))
    a = block_moments(data, 12, 9, 8)
    b = expanding_moments(data, 12, 9)
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.cov, b.cov)


def test_block_errors():
    with pytest.raises(InputError):
        block_moments(col(1, 2, 3, 4), 4, 3, 4)
    with pytest.raises(InputError):
        block_moments(col(1, 2, 3, 4), 4, 5, 1)


def test_pd_identity_unchanged():
    m = GaussianMoments(np.zeros(3), np.eye(3))
    assert ensure_positive_definite(m, 1e-8) is m


def test_pd_zero_cov():
    out = ensure_positive_definite(GaussianMoments(np.ones(2), np.zeros((2, 2))), 1e-8)
    np.testing.assert_allclose(out.cov, 1e-8 * np.eye(2), rtol=0, atol=1e-20)
    np.testing.assert_array_equal(out.mean, np.ones(2))


def test_pd_rank_one():
    out = ensure_positive_definite(GaussianMoments(np.zeros(2), np.ones((2, 2))), 1e-6)
    # eigenvalues 0 and 2; loading by 1e-6 lifts the zero one onto the floor
    np.testing.assert_allclose(out.cov, [[1 + 1e-6, 1], [1, 1 + 1e-6]], rtol=0, atol=1e-12)
    assert np.linalg.eigvalsh(out.cov).min() >= 1e-6 - 1e-15


def test_pd_rejects_asymmetric():
    with pytest.raises(InputError):
        ensure_positive_definite(GaussianMoments(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]])), 1e-8)


def test_default_floor_is_relative_to_trace():
    cov = np.diag([2.0, 4.0])
    assert default_pd_floor(cov) == pytest.approx(1e-8 * 3.0)


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def sample_rows(draw):
    n = draw(st.integers(3, 30))
    d = draw(st.integers(1, 4))
    return draw(arrays(np.float64, (n, d), elements=finite))


@given(sample_rows())
def test_full_sample_is_textbook(x):
    n = x.shape[0]
    m = expanding_moments(ReturnMatrix("x", x), n, n + 1)
    np.testing.assert_allclose(m.mean, x.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(m.cov, np.atleast_2d(np.cov(x, rowvar=False, ddof=1)), atol=1e-10)


@given(sample_rows(), arrays(np.float64, 4, elements=finite))
def test_shift_equivariance(x, c):
    n, d = x.shape
    a = expanding_moments(ReturnMatrix("x", x), n, n + 1)
    b = expanding_moments(ReturnMatrix("x", x + c[:d]), n, n + 1)
    np.testing.assert_allclose(b.mean, a.mean + c[:d], atol=1e-10)
    np.testing.assert_allclose(b.cov, a.cov, atol=1e-10)


@given(sample_rows(), st.floats(0.01, 100))
def test_scale_equivariance(x, s):
    n = x.shape[0]
    a = expanding_moments(ReturnMatrix("x", x), n, n + 1)
    b = expanding_moments(ReturnMatrix("x", s * x), n, n + 1)
    np.testing.assert_allclose(b.mean, s * a.mean, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(b.cov, s * s * a.cov, rtol=1e-9, atol=1e-8)


@settings(max_examples=200)
@given(sample_rows())
def test_repair_admits_cholesky(x):
    n = x.shape[0]
    m = repaired(expanding_moments(ReturnMatrix("x", x[: min(n, 3)]), min(n, 3), min(n, 3) + 1))
    np.linalg.cholesky(m.cov)
