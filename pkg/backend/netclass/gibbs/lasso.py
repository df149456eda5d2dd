"""
Network Lasso chain.

Local variances s^2_{k,l} are exponential with rate theta^2 / 2, so each
edge coefficient is Laplace around its low-rank mean; theta^2 carries a
Gamma(zeta, rate iota) prior.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from ..distributions import GigParams, as_generator, sample_gamma, sample_gig
from ..network import EdgeLayout, NetworkDataset, edge_layout
from .common import NetworkGibbsSampler, draw_prior_structure, finish_prior_state, log_posterior_common
from .state import ChainStateLasso

logger = logging.getLogger(__name__)


def update_local_scales(state: ChainStateLasso, prior, rng,
                        layout: Optional[EdgeLayout] = None) -> Tuple[np.ndarray, float]:
    """
    s^2_{k,l} ~ GIG(1/2, (gamma_{k,l} - W_{k,l})^2, theta^2) per edge, then
    theta^2 ~ Gamma(zeta + q, rate iota + sum(s^2) / 2).
    """
    layout = layout or edge_layout(state.V)
    gen = as_generator(rng)
    resid = state.gamma - state.low_rank_mean(layout)
    state.s2 = np.atleast_1d(sample_gig(GigParams(0.5, resid ** 2, state.theta2), gen))
    q = state.s2.shape[0]
    state.theta2 = sample_gamma(prior.zeta + q, prior.iota + 0.5 * float(np.sum(state.s2)), gen)
    return state.s2, state.theta2


def log_posterior(state: ChainStateLasso, data: NetworkDataset, prior,
                  layout: Optional[EdgeLayout] = None) -> float:
    """Unnormalized log joint density of the Network Lasso model (omega integrated out)."""
    total = log_posterior_common(state, data, prior, layout)
    half = state.theta2 / 2.0
    total += float(np.sum(np.log(half) - half * state.s2))
    total += float(stats.gamma.logpdf(state.theta2, prior.zeta, scale=1.0 / prior.iota))
    return total


def sample_prior(V: int, prior, rng, mu: float = 0.0) -> ChainStateLasso:
    """
    Forward draw of every Network Lasso block from its prior.

    mu has a flat prior and is set to ``mu``; omega is left empty.
    """
    gen = as_generator(rng)
    structure = draw_prior_structure(V, prior, gen)
    q = V * (V - 1) // 2
    theta2 = sample_gamma(prior.zeta, prior.iota, gen)
    s2 = gen.exponential(2.0 / theta2, size=q)
    state = ChainStateLasso(
        mu=float(mu), gamma=np.zeros(q), s2=s2, omega=np.empty(0), theta2=theta2, **structure
    )
    return finish_prior_state(state, gen)


class LassoSampler(NetworkGibbsSampler):
    """Gibbs chain for the Bayesian Network Lasso classifier."""

    kind = "bnlc"
    state_cls = ChainStateLasso
    global_scale = "theta2"

    def initial_scales(self, q: int) -> dict:
        return {"theta2": 1.0}

    def update_scales(self, state: ChainStateLasso) -> None:
        update_local_scales(state, self.prior, self.rng.generator, self.layout)

    def log_posterior(self, state: ChainStateLasso) -> float:
        return log_posterior(state, self.data, self.prior, self.layout)

    def prior_draw(self, mu: float = 0.0) -> ChainStateLasso:
        return sample_prior(self.data.V, self.prior, self.rng.generator, mu)
