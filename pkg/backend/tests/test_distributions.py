import numpy as np
import pytest
from scipy import linalg
from scipy.special import kv

from netclass.distributions import (
    JITTER_MAX,
    GigParams,
    RngStream,
    as_generator,
    cholesky_with_jitter,
    gig_mean,
    polya_gamma_mean,
    polya_gamma_variance,
    sample_bernoulli_logodds,
    sample_gamma,
    sample_gaussian_precision,
    sample_gaussian_woodbury,
    sample_gig,
    sample_inverse_gamma,
    sample_inverse_wishart,
    sample_mvn,
    sample_polya_gamma,
)
from netclass.errors import SamplerError, ValidationError


def gig_moment(p, a, b, k):
    w = np.sqrt(a * b)
    return (a / b) ** (k / 2.0) * kv(p + k, w) / kv(p, w)


def test_rng_stream_reproducible():
    a = RngStream(5, 2).generator.random(4)
    b = RngStream(5, 2).generator.random(4)
    c = RngStream(5, 3).generator.random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    s1 = RngStream(5).substream(1).generator.random(3)
    s2 = RngStream(5).substream(2).generator.random(3)
    assert not np.array_equal(s1, s2)
    assert np.array_equal(s1, RngStream(5).substream(1).generator.random(3))


def test_rng_stream_rejects_negative_seed():
    with pytest.raises(ValidationError):
        RngStream(-1)
    with pytest.raises(ValidationError):
        as_generator(42)


@pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 2.5])
def test_polya_gamma_mean(c):
    N = 100_000
    draws = sample_polya_gamma(1, np.full(N, c), RngStream(1))
    se = np.sqrt(polya_gamma_variance(c) / N)
    assert abs(draws.mean() - polya_gamma_mean(c)) < 3 * se


def test_polya_gamma_closed_forms():
    assert polya_gamma_mean(0.0) == pytest.approx(0.25)
    assert polya_gamma_variance(0.0) == pytest.approx(1.0 / 24.0)
    assert polya_gamma_mean(2.0) == pytest.approx(np.tanh(1.0) / 4.0)
    assert polya_gamma_mean(-2.0) == polya_gamma_mean(2.0)


def test_polya_gamma_shapes_and_errors():
    gen = np.random.default_rng(0)
    assert isinstance(sample_polya_gamma(1, 0.3, gen), float)
    assert sample_polya_gamma(1, np.zeros((2, 3)), gen).shape == (2, 3)
    assert sample_polya_gamma(1, np.zeros(0), gen).shape == (0,)
    with pytest.raises(ValidationError):
        sample_polya_gamma(2, 1.0, gen)
    with pytest.raises(SamplerError):
        sample_polya_gamma(1, np.array([np.inf]), gen)


@pytest.mark.parametrize("a", [0.5, 1.0, 4.0])
@pytest.mark.parametrize("b", [0.5, 1.0, 4.0])
def test_gig_half_moments(a, b):
    N = 2_000_000
    draws = sample_gig(GigParams(0.5, np.full(N, a), b), RngStream(3))
    assert draws.mean() == pytest.approx(gig_moment(0.5, a, b, 1), rel=0.01)
    assert np.mean(draws ** 2) == pytest.approx(gig_moment(0.5, a, b, 2), rel=0.01)


def test_gig_closed_form_mean():
    for a, b in [(0.5, 2.0), (3.0, 0.7)]:
        assert gig_mean(GigParams(0.5, a, b)) == pytest.approx(gig_moment(0.5, a, b, 1), rel=1e-10)


def test_gig_gamma_limit():
    N = 200_000
    draws = sample_gig(GigParams(0.5, np.zeros(N), 2.0), RngStream(4))
    # Gamma(1/2, rate 1): mean 1/2, variance 1/2
    assert abs(draws.mean() - 0.5) < 3 * np.sqrt(0.5 / N)
    assert np.all(draws > 0)


def test_gig_other_order():
    N = 200_000
    p, a, b = 1.5, 2.0, 3.0
    draws = sample_gig(GigParams(p, np.full(N, a), b), RngStream(5))
    assert draws.mean() == pytest.approx(gig_moment(p, a, b, 1), rel=0.01)


def test_gig_invalid_parameters():
    with pytest.raises(ValidationError):
        sample_gig(GigParams(0.5, 1.0, 0.0), RngStream(0))
    with pytest.raises(ValidationError):
        sample_gig(GigParams(-0.5, 0.0, 1.0), RngStream(0))
    with pytest.raises(ValidationError):
        sample_gig(GigParams(0.5, -1.0, 1.0), RngStream(0))


def test_gamma_and_inverse_gamma_means():
    gen = np.random.default_rng(2)
    N = 100_000
    g = sample_gamma(np.full(N, 3.0), 2.0, gen)
    assert abs(g.mean() - 1.5) < 3 * np.sqrt(3.0 / 4.0 / N)
    ig = sample_inverse_gamma(np.full(N, 5.0), 2.0, gen)
    var = 2.0 ** 2 / (4.0 ** 2 * 3.0)
    assert abs(ig.mean() - 0.5) < 3 * np.sqrt(var / N)
    with pytest.raises(SamplerError):
        sample_inverse_gamma(1.0, 0.0, gen)
    with pytest.raises(SamplerError):
        sample_gamma(0.0, 1.0, gen)


@pytest.mark.parametrize("R", [1, 2, 5])
def test_inverse_wishart_mean(R):
    gen = np.random.default_rng(R)
    B = gen.normal(size=(R, R))
    scale = B @ B.T + R * np.eye(R)
    df = R + 8.0
    N = 10_000
    draws = np.array([sample_inverse_wishart(df, scale, gen) for _ in range(N)])
    expected = scale / (df - R - 1)
    se = draws.std(axis=0, ddof=1) / np.sqrt(N)
    assert draws.shape == (N, R, R)
    assert np.all(np.abs(draws.mean(axis=0) - expected) < 4 * se + 1e-12)
    assert np.allclose(draws[0], draws[0].T)


def test_inverse_wishart_validation():
    gen = np.random.default_rng(0)
    with pytest.raises(ValidationError, match="df"):
        sample_inverse_wishart(1.0, np.eye(3), gen)
    with pytest.raises(ValidationError, match="symmetric"):
        sample_inverse_wishart(10.0, np.array([[1.0, 0.5], [0.0, 1.0]]), gen)
    with pytest.raises(ValidationError, match="positive definite"):
        sample_inverse_wishart(10.0, -np.eye(2), gen)


def test_cholesky_with_jitter():
    L, jitter = cholesky_with_jitter(np.eye(3))
    assert jitter == 0.0
    assert np.allclose(L, np.eye(3))

    singular = np.ones((3, 3))
    L, jitter = cholesky_with_jitter(singular)
    assert 0.0 < jitter <= JITTER_MAX
    assert np.allclose(L @ L.T, singular + jitter * np.eye(3))

    with pytest.raises(SamplerError, match="condition number"):
        cholesky_with_jitter(-np.eye(2), "test matrix")


def test_sample_mvn_zero_covariance_returns_mean():
    mean = np.array([1.0, -2.0])
    assert np.array_equal(sample_mvn(mean, np.zeros((2, 2)), RngStream(0)), mean)
    with pytest.raises(ValidationError):
        sample_mvn(mean, np.eye(3), RngStream(0))


def test_precision_and_woodbury_draws_agree():
    gen = np.random.default_rng(9)
    n, p = 3, 8
    Phi = gen.normal(size=(n, p))
    D = gen.uniform(0.5, 2.0, size=p)
    alpha = gen.normal(size=n)
    precision = Phi.T @ Phi + np.diag(1.0 / D)
    Sigma = linalg.inv(precision)
    mean = Sigma @ Phi.T @ alpha

    N = 20_000
    rng = RngStream(10)
    wood = np.array([sample_gaussian_woodbury(Phi, D, alpha, rng) for _ in range(N)])
    dense = np.array([sample_gaussian_precision(precision, Phi.T @ alpha, rng) for _ in range(N)])
    se = np.sqrt(np.diag(Sigma) / N)
    assert np.all(np.abs(wood.mean(axis=0) - mean) < 4 * se)
    assert np.all(np.abs(dense.mean(axis=0) - mean) < 4 * se)
    assert np.allclose(np.var(wood, axis=0), np.diag(Sigma), rtol=0.08)


def test_bernoulli_logodds_clamped():
    gen = np.random.default_rng(0)
    outcome, prob = sample_bernoulli_logodds(1000.0, gen)
    assert prob == pytest.approx(1.0 - 1e-12)
    assert outcome == 1
    _, prob = sample_bernoulli_logodds(-1000.0, gen)
    assert prob == pytest.approx(1e-12)
