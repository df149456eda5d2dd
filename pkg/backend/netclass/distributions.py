"""
Random draws used by the Gibbs conditionals.

Every sampler takes an ``RngStream`` (or a bare ``numpy.random.Generator``)
and is otherwise stateless. Parameterizations:

- Polya-Gamma PG(1, c), exact alternating-series sampler from ``polyagamma``.
- GIG(p, a, b) with density proportional to x^(p-1) exp(-(a/x + b x)/2).
- Gamma(shape, rate) and inverse gamma IG(shape, rate) with density
  proportional to x^(-shape-1) exp(-rate/x).
- Inverse-Wishart with E[draw] = scale / (df - R - 1).
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from polyagamma import random_polyagamma
from scipy import linalg, stats
from scipy.special import expit

from .errors import SamplerError, ValidationError

logger = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_MAX = 1e-6

# Below this value of sqrt(a b) the GIG(1/2) draw uses the a -> 0 gamma limit.
GIG_GAMMA_LIMIT = 1e-8

ArrayLike = Union[float, np.ndarray]


class RngStream:
    """
    A reproducible random stream identified by (seed, stream id).

    The same pair always yields the same draw sequence; distinct stream ids
    come from independent ``SeedSequence`` spawn keys, so chain ``i`` draws
    the same numbers no matter how many workers run beside it.
    """

    def __init__(self, seed: int, stream: int = 0, _key: Tuple[int, ...] = ()):
        if seed < 0:
            raise ValidationError(f"seed must be nonnegative, got {seed}")
        self.seed = int(seed)
        self.stream = int(stream)
        self._key = (self.stream,) + tuple(_key)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self._key)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def substream(self, index: int) -> "RngStream":
        """Independent child stream, e.g. one per simulated subject."""
        return RngStream(self.seed, self.stream, _key=self._key[1:] + (int(index),))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def as_generator(rng: Union[RngStream, np.random.Generator]) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise ValidationError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


# ---------------------------------------------------------------------------
# Polya-Gamma
# ---------------------------------------------------------------------------

def sample_polya_gamma(b_param: int, c: ArrayLike, rng) -> ArrayLike:
    """
    Draw from PG(1, c), elementwise over ``c``.

    Args:
        b_param: Must be 1.
        c: Tilting parameter(s).
        rng: RngStream or Generator.

    Returns:
        A float for scalar ``c``, otherwise an array shaped like ``c``.
    """
    if b_param != 1:
        raise ValidationError(f"only PG(1, c) is supported, got b={b_param}")
    gen = as_generator(rng)
    c_arr = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c_arr)):
        raise SamplerError("non-finite tilting parameter in Polya-Gamma draw")
    if c_arr.ndim == 0:
        return float(random_polyagamma(1, float(c_arr), method="devroye", random_state=gen))
    if c_arr.size == 0:
        return np.zeros(c_arr.shape)
    draws = random_polyagamma(1, c_arr, method="devroye", random_state=gen)
    return np.asarray(draws, dtype=float).reshape(c_arr.shape)


def polya_gamma_mean(c: ArrayLike) -> ArrayLike:
    """E[PG(1, c)] = tanh(c/2) / (2c), equal to 1/4 at c = 0."""
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-4
    safe = np.where(small, 1.0, c)
    mean = np.where(small, 0.25 - c ** 2 / 48.0, np.tanh(safe / 2.0) / (2.0 * safe))
    return float(mean) if mean.ndim == 0 else mean


def polya_gamma_variance(c: ArrayLike) -> ArrayLike:
    """Var[PG(1, c)] = (sinh c - c) / (4 c^3 cosh^2(c/2)), equal to 1/24 at c = 0."""
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-3
    safe = np.where(small, 1.0, c)
    var = np.where(
        small,
        1.0 / 24.0 - c ** 2 / 120.0,
        (np.sinh(safe) - safe) / (4.0 * safe ** 3 * np.cosh(safe / 2.0) ** 2),
    )
    return float(var) if var.ndim == 0 else var


# ---------------------------------------------------------------------------
# GIG, gamma family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GigParams:
    """
    GIG(p, a, b): density proportional to x^(p-1) exp(-(a/x + b x)/2).

    ``a`` and ``b`` may be arrays (broadcast together) for vectorized draws.
    """

    p: float
    a: ArrayLike
    b: ArrayLike

    def validate(self) -> Tuple[np.ndarray, np.ndarray]:
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)):
            raise ValidationError("GIG parameters must be finite")
        if np.any(a < 0) or np.any(b < 0):
            raise ValidationError(f"GIG parameters a, b must be nonnegative (p={self.p})")
        a, b = np.broadcast_arrays(a, b)
        # Integrability: p > 0 needs b > 0, p < 0 needs a > 0, p = 0 needs both.
        if self.p >= 0 and np.any(b == 0):
            raise ValidationError(f"GIG with p={self.p} requires b > 0")
        if self.p <= 0 and np.any(a == 0):
            raise ValidationError(f"GIG with p={self.p} requires a > 0")
        return a, b


def gig_mean(params: GigParams) -> ArrayLike:
    """Closed-form mean for p = 1/2: sqrt(a/b) (1 + 1/sqrt(ab))."""
    if params.p != 0.5:
        raise ValidationError("closed-form GIG mean is implemented for p = 1/2 only")
    a, b = params.validate()
    return np.sqrt(a / b) + 1.0 / b


def sample_gig(params: GigParams, rng) -> ArrayLike:
    """
    Draw from GIG(p, a, b).

    For p = 1/2 the draw is the reciprocal of an inverse-Gaussian variate with
    mean sqrt(b/a) and shape b. When sqrt(ab) is tiny (including a = 0) the
    gamma law Gamma(p, rate b/2) is used instead. Other orders go through
    ``scipy.stats.geninvgauss``.

    Returns:
        A float for scalar parameters, otherwise an array.
    """
    gen = as_generator(rng)
    a, b = params.validate()
    scalar = a.ndim == 0
    a = np.atleast_1d(a).astype(float)
    b = np.atleast_1d(b).astype(float)
    out = np.empty(a.shape)
    root = np.sqrt(a * b)
    limit = (root < GIG_GAMMA_LIMIT) & (params.p != 0)

    if np.any(limit):
        if params.p > 0:
            out[limit] = gen.gamma(params.p, 2.0 / b[limit])
        else:
            out[limit] = 1.0 / gen.gamma(-params.p, 2.0 / a[limit])

    rest = ~limit
    if np.any(rest):
        if params.p == 0.5:
            inv = gen.wald(np.sqrt(b[rest] / a[rest]), b[rest])
            out[rest] = 1.0 / inv
        else:
            y = stats.geninvgauss.rvs(params.p, root[rest], size=int(rest.sum()), random_state=gen)
            out[rest] = np.sqrt(a[rest] / b[rest]) * y

    if not np.all(np.isfinite(out)) or np.any(out <= 0):
        raise SamplerError(f"GIG draw left the positive reals (p={params.p})")
    return float(out[0]) if scalar else out


def sample_gamma(shape: ArrayLike, rate: ArrayLike, rng) -> ArrayLike:
    """Gamma(shape, rate), mean shape / rate."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise SamplerError("gamma draw needs positive shape and rate")
    draw = as_generator(rng).gamma(shape, 1.0 / rate)
    return float(draw) if np.ndim(draw) == 0 else draw


def sample_inverse_gamma(shape: ArrayLike, rate: ArrayLike, rng) -> ArrayLike:
    """IG(shape, rate) with density proportional to x^(-shape-1) exp(-rate/x)."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0) or np.any(~np.isfinite(rate)):
        raise SamplerError("inverse-gamma draw needs positive finite shape and rate")
    draw = 1.0 / as_generator(rng).gamma(shape, 1.0 / rate)
    return float(draw) if np.ndim(draw) == 0 else draw


# ---------------------------------------------------------------------------
# Gaussian and Wishart
# ---------------------------------------------------------------------------

def cholesky_with_jitter(matrix: np.ndarray, what: str = "covariance") -> Tuple[np.ndarray, float]:
    """
    Lower Cholesky factor, adding diagonal jitter if the plain factorization fails.

    Jitter starts at 1e-10 times the mean diagonal and grows tenfold up to
    1e-6 times the mean diagonal.

    Returns:
        (L, jitter) where jitter is the absolute amount added (0.0 if none).

    Raises:
        SamplerError: when even the largest jitter fails, with the condition
            number of the input in the message.
    """
    M = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(M)):
        raise SamplerError(f"non-finite entries in {what}")
    try:
        return linalg.cholesky(M, lower=True, check_finite=False), 0.0
    except linalg.LinAlgError:
        pass

    scale = float(np.mean(np.diag(M)))
    if scale <= 0:
        scale = 1.0
    factor = JITTER_START
    eye = np.eye(M.shape[0])
    while factor <= JITTER_MAX * (1 + 1e-9):
        jitter = factor * scale
        try:
            L = linalg.cholesky(M + jitter * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            factor *= 10.0
            continue
        logger.warning("%s factorized with diagonal jitter %.3g", what, jitter)
        return L, jitter

    try:
        cond = float(np.linalg.cond(M))
    except np.linalg.LinAlgError:
        cond = float("inf")
    eigmin = float(np.min(np.linalg.eigvalsh((M + M.T) / 2.0)))
    raise SamplerError(
        f"{what} is not positive definite after jitter up to {JITTER_MAX:g}: "
        f"condition number {cond:.3g}, smallest eigenvalue {eigmin:.3g}"
    )


def sample_mvn(mean: np.ndarray, cov: np.ndarray, rng) -> np.ndarray:
    """
    Gaussian draw N(mean, cov).

    A zero covariance returns ``mean`` exactly.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (mean.shape[0], mean.shape[0]):
        raise ValidationError(f"covariance shape {cov.shape} does not match mean length {mean.shape[0]}")
    if not np.any(cov):
        return mean.copy()
    L, _ = cholesky_with_jitter(cov, "covariance")
    z = as_generator(rng).standard_normal(mean.shape[0])
    return mean + L @ z


def sample_gaussian_precision(precision: np.ndarray, linear: np.ndarray, rng,
                              what: str = "precision") -> np.ndarray:
    """
    Draw from N(P^-1 b, P^-1) given the precision P and linear term b.

    One Cholesky factorization of P; cost O(d^3).
    """
    L, _ = cholesky_with_jitter(precision, what)
    mean = linalg.cho_solve((L, True), linear, check_finite=False)
    z = as_generator(rng).standard_normal(linear.shape[0])
    return mean + linalg.solve_triangular(L.T, z, lower=False, check_finite=False)


def sample_gaussian_woodbury(Phi: np.ndarray, D: np.ndarray, alpha: np.ndarray, rng,
                             what: str = "woodbury system") -> np.ndarray:
    """
    Draw theta ~ N(Sigma Phi' alpha, Sigma) with Sigma = (Phi'Phi + D^-1)^-1.

    Auxiliary-variable algorithm for p >> n: only an n x n system is factorized,
    so the cost is O(n^2 p).

    Args:
        Phi: n x p matrix.
        D: Length-p prior variances (diagonal).
        alpha: Length-n vector.
    """
    gen = as_generator(rng)
    n, p = Phi.shape
    u = np.sqrt(D) * gen.standard_normal(p)
    delta = gen.standard_normal(n)
    v = Phi @ u + delta
    M = (Phi * D) @ Phi.T + np.eye(n)
    L, _ = cholesky_with_jitter(M, what)
    w = linalg.cho_solve((L, True), alpha - v, check_finite=False)
    return u + D * (Phi.T @ w)


def sample_inverse_wishart(df: float, scale: np.ndarray, rng) -> np.ndarray:
    """
    Inverse-Wishart draw with E[draw] = scale / (df - R - 1).

    Raises:
        ValidationError: if df <= R - 1 or scale is not symmetric positive definite.
    """
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    R = scale.shape[0]
    if scale.shape != (R, R):
        raise ValidationError(f"scale must be square, got shape {scale.shape}")
    if df <= R - 1:
        raise ValidationError(f"inverse-Wishart needs df > R - 1, got df={df}, R={R}")
    if not np.allclose(scale, scale.T, atol=1e-10):
        raise ValidationError("inverse-Wishart scale must be symmetric")
    try:
        linalg.cholesky(scale, lower=True)
    except linalg.LinAlgError as exc:
        raise ValidationError("inverse-Wishart scale is not positive definite") from exc

    draw = stats.invwishart.rvs(df=df, scale=scale, random_state=as_generator(rng))
    draw = np.atleast_2d(draw)
    return (draw + draw.T) / 2.0


def sample_bernoulli_logodds(log_odds: float, rng) -> Tuple[int, float]:
    """
    Bernoulli draw from log-odds, probability clamped to [1e-12, 1 - 1e-12].

    Returns:
        (outcome, probability)
    """
    prob = float(np.clip(expit(log_odds), 1e-12, 1.0 - 1e-12))
    return int(as_generator(rng).random() < prob), prob
