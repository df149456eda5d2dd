"""
Gibbs updates shared by the Network Lasso and Network Horseshoe chains.

The two priors differ only in how the edge variances D are generated, so
every conditional that sees the local scales only through D lives here and
is reused verbatim by both samplers. Each ``update_*`` function writes its
block back into ``state`` and also returns the new value.
"""

import logging
import sys
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import linalg, stats
from scipy.special import logit
from tqdm import tqdm

from ..config import McmcConfig
from ..distributions import (
    RngStream,
    as_generator,
    cholesky_with_jitter,
    sample_bernoulli_logodds,
    sample_gaussian_precision,
    sample_gaussian_woodbury,
    sample_inverse_wishart,
    sample_polya_gamma,
)
from ..errors import SamplerError, ValidationError
from ..network import EdgeLayout, NetworkDataset, edge_layout
from .state import ChainState

logger = logging.getLogger(__name__)

# Above this edge count (and when q > n) gamma is drawn through the n x n system.
DENSE_GAMMA_LIMIT = 1024


def _kappa(data: NetworkDataset) -> np.ndarray:
    return data.labels.astype(float) - 0.5


def update_omega(state: ChainState, data: NetworkDataset, rng) -> np.ndarray:
    """omega_i ~ PG(1, mu + x_i' gamma), independently over subjects."""
    psi = state.mu + data.edges @ state.gamma
    state.omega = np.atleast_1d(sample_polya_gamma(1, psi, rng))
    return state.omega


def update_mu(state: ChainState, data: NetworkDataset, rng) -> float:
    """
    Conjugate draw of the intercept under its flat prior.

    Precision sum(omega); mean sum(kappa_i - omega_i x_i' gamma) / sum(omega)
    with kappa_i = y_i - 1/2. With no subjects the value is left unchanged.
    """
    if data.n == 0:
        return state.mu
    precision = float(np.sum(state.omega))
    mean = float(np.sum(_kappa(data) - state.omega * (data.edges @ state.gamma))) / precision
    state.mu = mean + as_generator(rng).standard_normal() / np.sqrt(precision)
    return state.mu


def update_gamma(state: ChainState, data: NetworkDataset, rng,
                 layout: Optional[EdgeLayout] = None) -> np.ndarray:
    """
    Draw gamma from N(m, S) with S = (X' Omega X + D^-1)^-1 and
    m = S (X'(kappa - omega mu) + D^-1 W).

    Dense factorization of the q x q precision when q <= n or q is at most
    ``DENSE_GAMMA_LIMIT``; otherwise the auxiliary-variable draw that only
    factorizes an n x n matrix.
    """
    layout = layout or edge_layout(state.V)
    gen = as_generator(rng)
    D = state.edge_variances()
    W = state.low_rank_mean(layout)
    X = data.edges
    n, q = X.shape

    if n == 0:
        state.gamma = W + np.sqrt(D) * gen.standard_normal(q)
    elif q <= n or q <= DENSE_GAMMA_LIMIT:
        precision = X.T @ (state.omega[:, None] * X)
        precision[np.diag_indices(q)] += 1.0 / D
        linear = X.T @ (_kappa(data) - state.omega * state.mu) + W / D
        state.gamma = sample_gaussian_precision(precision, linear, gen, "edge-coefficient precision")
    else:
        root = np.sqrt(state.omega)
        Phi = root[:, None] * X
        alpha = _kappa(data) / root - root * state.mu - Phi @ W
        state.gamma = W + sample_gaussian_woodbury(Phi, D, alpha, gen, "edge-coefficient system")
    return state.gamma


def node_slab_posterior(Ustar: np.ndarray, h: np.ndarray, g: np.ndarray,
                        Q: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Slab-versus-spike evidence for one node.

    With g ~ N(Ustar u, diag(h)) and u ~ N(0, Q) on the slab, returns
    ``(log_ratio, m, L)`` where ``log_ratio`` is
    log N(g | 0, H + Ustar Q Ustar') - log N(g | 0, H), ``m`` the slab
    posterior mean of u and ``L`` the lower Cholesky factor of the slab
    posterior precision. If ``Ustar`` is all zero both marginals coincide:
    the ratio is exactly 0 and the slab posterior is the prior (L is None).
    """
    if not np.any(Ustar):
        return 0.0, np.zeros(Q.shape[0]), None
    L_Q, _ = cholesky_with_jitter(Q, "latent covariance Q")
    Q_inv = linalg.cho_solve((L_Q, True), np.eye(Q.shape[0]), check_finite=False)
    precision = Ustar.T @ (Ustar / h[:, None]) + Q_inv
    linear = Ustar.T @ (g / h)
    L, _ = cholesky_with_jitter(precision, "latent-position precision")
    m = linalg.cho_solve((L, True), linear, check_finite=False)
    logdet_Q = 2.0 * np.sum(np.log(np.diag(L_Q)))
    logdet_P = 2.0 * np.sum(np.log(np.diag(L)))
    log_ratio = -0.5 * (logdet_Q + logdet_P) + 0.5 * float(linear @ m)
    return log_ratio, m, L


def update_latent_positions(state: ChainState, rng,
                            layout: Optional[EdgeLayout] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Joint spike-and-slab draw of (xi_k, u_k) for k = 1..V in order.

    The edges incident to node k follow gamma_kj ~ N(u_k' Lambda u_j, D_kj),
    so u_k is regressed on the rows Lambda u_j of the other nodes.
    """
    layout = layout or edge_layout(state.V)
    gen = as_generator(rng)
    D = state.edge_variances()
    prior_odds = logit(state.delta)

    for k in range(state.V):
        try:
            Ustar = state.u[layout.node_others[k]] * state.lam
            edges = layout.node_edges[k]
            log_ratio, m, L = node_slab_posterior(Ustar, D[edges], state.gamma[edges], state.Q)
        except SamplerError as exc:
            raise SamplerError(f"node {k + 1}: {exc}") from exc

        active, _ = sample_bernoulli_logodds(prior_odds + log_ratio, gen)
        state.xi[k] = active
        if not active:
            state.u[k] = 0.0
            continue
        z = gen.standard_normal(state.R)
        if L is None:
            L_Q, _ = cholesky_with_jitter(state.Q, "latent covariance Q")
            draw = L_Q @ z
        else:
            draw = m + linalg.solve_triangular(L.T, z, lower=False, check_finite=False)
        # An active row must stay distinguishable from the spike.
        if not np.any(draw):
            draw[0] = np.finfo(float).tiny
        state.u[k] = draw
    return state.u, state.xi


def update_node_sparsity(state: ChainState, prior, rng) -> float:
    """Delta ~ Beta(a_delta + sum xi, b_delta + V - sum xi)."""
    active = int(np.sum(state.xi))
    state.delta = float(as_generator(rng).beta(prior.a_delta + active, prior.b_delta + state.V - active))
    return state.delta


def update_Q(state: ChainState, prior, rng) -> np.ndarray:
    """Q ~ IW(nu + #active, I + sum over active nodes of u_k u_k')."""
    active = state.xi == 1
    U = state.u[active]
    scale = np.eye(state.R) + U.T @ U
    try:
        state.Q = sample_inverse_wishart(prior.nu + int(active.sum()), scale, rng)
    except ValidationError as exc:
        raise SamplerError(f"Q update: {exc}") from exc
    return state.Q


def update_rank_indicators(state: ChainState, prior, rng,
                           layout: Optional[EdgeLayout] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    For r = 1..R: lambda_r from the posterior odds of the two Gaussian
    likelihoods N(gamma | W_1, D) vs N(gamma | W_0, D), then
    pi_r ~ Beta(lambda_r + 1, 1 - lambda_r + r^eta).
    """
    layout = layout or edge_layout(state.V)
    gen = as_generator(rng)
    D = state.edge_variances()
    W = state.low_rank_mean(layout)

    for r in range(state.R):
        component = state.u[layout.rows, r] * state.u[layout.cols, r]
        W_off = W - state.lam[r] * component
        resid_on = state.gamma - W_off - component
        resid_off = state.gamma - W_off
        log_lik_diff = -0.5 * float(np.sum((resid_on ** 2 - resid_off ** 2) / D))
        state.lam[r], _ = sample_bernoulli_logodds(logit(state.pi_r[r]) + log_lik_diff, gen)
        W = W_off + state.lam[r] * component
        state.pi_r[r] = gen.beta(state.lam[r] + 1.0, 1.0 - state.lam[r] + (r + 1) ** prior.eta)
    return state.lam, state.pi_r


def log_posterior_common(state: ChainState, data: NetworkDataset, prior,
                         layout: Optional[EdgeLayout] = None) -> float:
    """
    Log density terms shared by both priors: logistic likelihood, gamma given
    (W, D), latent positions, node sparsity, Q and the rank indicators.
    The flat prior on mu contributes nothing.
    """
    layout = layout or edge_layout(state.V)
    psi = state.mu + data.edges @ state.gamma
    y = data.labels.astype(float)
    total = float(np.sum(y * psi - np.logaddexp(0.0, psi)))

    D = state.edge_variances()
    resid = state.gamma - state.low_rank_mean(layout)
    total += -0.5 * float(np.sum(np.log(2.0 * np.pi * D) + resid ** 2 / D))

    active = state.xi == 1
    if np.any(active):
        total += float(np.sum(stats.multivariate_normal.logpdf(
            state.u[active], mean=np.zeros(state.R), cov=state.Q, allow_singular=False)))
    n_active = int(active.sum())
    total += n_active * np.log(state.delta) + (state.V - n_active) * np.log1p(-state.delta)
    total += float(stats.beta.logpdf(state.delta, prior.a_delta, prior.b_delta))

    if state.R == 1:
        total += float(stats.invgamma.logpdf(state.Q[0, 0], a=prior.nu / 2.0, scale=0.5))
    else:
        total += float(stats.invwishart.logpdf(state.Q, df=prior.nu, scale=np.eye(state.R)))

    ranks = np.arange(1, state.R + 1)
    total += float(np.sum(np.where(state.lam == 1, np.log(state.pi_r), np.log1p(-state.pi_r))))
    total += float(np.sum(stats.beta.logpdf(state.pi_r, 1.0, ranks ** prior.eta)))
    return total


@dataclass
class ChainTrace:
    """Retained draws of one chain."""

    chain: int
    mu: np.ndarray
    gamma: np.ndarray
    xi: np.ndarray
    lam: np.ndarray
    extras: Dict[str, np.ndarray] = field(default_factory=dict)
    seconds: float = 0.0


class NetworkGibbsSampler:
    """
    One Gibbs chain over (omega, mu, gamma, scales, u, xi, Delta, Q, lambda, pi).

    Subclasses supply the local/global scale updates, their initial values,
    their prior draws and their log-density terms.
    """

    kind: str = None
    state_cls = ChainState
    global_scale: str = None

    def __init__(self, data: NetworkDataset, prior, cfg: Optional[McmcConfig] = None, chain: int = 0):
        if prior.kind != self.kind:
            raise ValidationError(f"{type(self).__name__} needs a {self.kind} prior, got {prior.kind}")
        if data.V < 2:
            raise ValidationError("networks need at least two nodes")
        self.data = data
        self.prior = prior
        self.cfg = cfg or McmcConfig()
        self.chain = chain
        self.rng = RngStream(self.cfg.seed, chain)
        self.layout = edge_layout(data.V)

    # -- prior-specific hooks -------------------------------------------------

    def initial_scales(self, q: int) -> dict:
        raise NotImplementedError

    def update_scales(self, state: ChainState) -> None:
        raise NotImplementedError

    def log_posterior(self, state: ChainState) -> float:
        raise NotImplementedError

    # -- chain ----------------------------------------------------------------

    def initial_state(self) -> ChainState:
        """
        Starting point: mu at the logit of the label mean, gamma = 0, every node
        active with u_k ~ N(0, 0.1 I), all ranks on, pi_r = 1/2, Delta = 1/2,
        Q = I and omega drawn from its conditional.
        """
        gen = self.rng.generator
        data = self.data
        V, R, q = data.V, self.prior.R, data.q
        if data.n:
            mu = float(logit(np.clip(np.mean(data.labels), 0.01, 0.99)))
        else:
            mu = 0.0
        state = self.state_cls(
            mu=mu,
            gamma=np.zeros(q),
            u=gen.normal(0.0, np.sqrt(0.1), size=(V, R)),
            xi=np.ones(V, dtype=np.int8),
            lam=np.ones(R, dtype=np.int8),
            pi_r=np.full(R, 0.5),
            s2=np.ones(q),
            delta=0.5,
            Q=np.eye(R),
            omega=np.ones(data.n),
            **self.initial_scales(q),
        )
        update_omega(state, data, gen)
        return state

    def sweep(self, state: ChainState) -> ChainState:
        """One full scan in the order omega, mu, gamma, scales, (u, xi), Delta, Q, (lambda, pi)."""
        frozen = self.cfg.frozen
        gen = self.rng.generator
        if "omega" not in frozen:
            update_omega(state, self.data, gen)
        if "mu" not in frozen:
            update_mu(state, self.data, gen)
        if "gamma" not in frozen:
            update_gamma(state, self.data, gen, self.layout)
        if "scales" not in frozen:
            self.update_scales(state)
        if "positions" not in frozen:
            update_latent_positions(state, gen, self.layout)
        if "delta" not in frozen:
            update_node_sparsity(state, self.prior, gen)
        if "Q" not in frozen:
            update_Q(state, self.prior, gen)
        if "ranks" not in frozen:
            update_rank_indicators(state, self.prior, gen, self.layout)
        return state

    def run(self, state: Optional[ChainState] = None) -> ChainTrace:
        """
        Run ``cfg.total`` sweeps and keep the thinned post-burn-in draws.

        Raises:
            SamplerError: with the chain id and sweep index attached.
        """
        cfg = self.cfg
        start = time.perf_counter()
        state = state if state is not None else self.initial_state()
        L = cfg.n_retained
        V, R, q = self.data.V, self.prior.R, self.data.q
        mu = np.empty(L)
        gamma = np.empty((L, q))
        xi = np.empty((L, V), dtype=np.int8)
        lam = np.empty((L, R), dtype=np.int8)
        extras = {name: np.empty(L) for name in ("delta", self.global_scale, "log_posterior")}

        logger.info("chain %d (%s) started: seed %d, %d sweeps", self.chain, self.kind, cfg.seed, cfg.total)
        show = cfg.progress and sys.stderr.isatty()
        kept = 0
        for sweep in tqdm(range(1, cfg.total + 1), disable=not show, desc=f"{self.kind} chain {self.chain}"):
            try:
                self.sweep(state)
                state.check()
                if cfg.is_retained(sweep):
                    log_post = self.log_posterior(state)
                    if not np.isfinite(log_post):
                        raise SamplerError("log posterior is not finite at a retained state")
                    mu[kept] = state.mu
                    gamma[kept] = state.gamma
                    xi[kept] = state.xi
                    lam[kept] = state.lam
                    extras["delta"][kept] = state.delta
                    extras[self.global_scale][kept] = getattr(state, self.global_scale)
                    extras["log_posterior"][kept] = log_post
                    kept += 1
            except SamplerError as exc:
                raise SamplerError(str(exc), iteration=sweep, chain=self.chain) from exc
            if sweep % cfg.log_every == 0:
                summary = " ".join(f"{name}={value:.4g}" for name, value in state.scalar_summaries().items())
                logger.debug("chain %d sweep %d: %s", self.chain, sweep, summary)

        seconds = time.perf_counter() - start
        logger.info("chain %d (%s) finished in %.1f s, %d draws kept", self.chain, self.kind, seconds, kept)
        return ChainTrace(self.chain, mu, gamma, xi, lam, extras, seconds)


def draw_prior_structure(V: int, prior, rng) -> dict:
    """
    Forward draw of the prior-shared blocks: Delta, xi, Q, u, pi and lambda.
    """
    gen = as_generator(rng)
    R = prior.R
    delta = float(gen.beta(prior.a_delta, prior.b_delta))
    xi = (gen.random(V) < delta).astype(np.int8)
    Q = sample_inverse_wishart(prior.nu, np.eye(R), gen)
    L_Q, _ = cholesky_with_jitter(Q, "latent covariance Q")
    u = gen.standard_normal((V, R)) @ L_Q.T
    u[xi == 0] = 0.0
    ranks = np.arange(1, R + 1)
    pi_r = gen.beta(1.0, ranks ** prior.eta)
    lam = (gen.random(R) < pi_r).astype(np.int8)
    return dict(delta=delta, xi=xi, Q=Q, u=u, pi_r=pi_r, lam=lam)


def finish_prior_state(state: ChainState, rng, layout: Optional[EdgeLayout] = None) -> ChainState:
    """Draw gamma ~ N(W, D) for a state whose other blocks come from the prior."""
    layout = layout or edge_layout(state.V)
    gen = as_generator(rng)
    D = state.edge_variances()
    state.gamma = state.low_rank_mean(layout) + np.sqrt(D) * gen.standard_normal(D.shape[0])
    return state
