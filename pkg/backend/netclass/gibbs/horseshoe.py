"""
Network Horseshoe chain.

s_{k,l} and sigma are half-Cauchy, sampled through the inverse-gamma
augmentation

    s^2 | nu ~ IG(1/2, 1/nu),          nu ~ IG(1/2, 1)
    sigma^2 | sigma_aux ~ IG(1/2, 1/sigma_aux),  sigma_aux ~ IG(1/2, 1)

and D = sigma^2 diag(s^2) everywhere the Lasso chain uses diag(s^2).
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from ..distributions import as_generator, sample_inverse_gamma
from ..network import EdgeLayout, NetworkDataset, edge_layout
from .common import NetworkGibbsSampler, draw_prior_structure, finish_prior_state, log_posterior_common
from .state import ChainStateHorseshoe

logger = logging.getLogger(__name__)


def update_local_scales_hs(state: ChainStateHorseshoe, rng, resid: Optional[np.ndarray] = None,
                           layout: Optional[EdgeLayout] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    s^2 ~ IG(1, 1/nu + r^2 / (2 sigma^2)) then nu ~ IG(1, 1 + 1/s^2), per edge,
    where r = gamma - W. ``resid`` overrides r.
    """
    gen = as_generator(rng)
    if resid is None:
        layout = layout or edge_layout(state.V)
        resid = state.gamma - state.low_rank_mean(layout)
    state.s2 = np.atleast_1d(
        sample_inverse_gamma(1.0, 1.0 / state.nu_aux + resid ** 2 / (2.0 * state.sigma2), gen))
    state.nu_aux = np.atleast_1d(sample_inverse_gamma(1.0, 1.0 + 1.0 / state.s2, gen))
    return state.s2, state.nu_aux


def update_global_scale_hs(state: ChainStateHorseshoe, rng, resid: Optional[np.ndarray] = None,
                           layout: Optional[EdgeLayout] = None) -> Tuple[float, float]:
    """
    sigma^2 ~ IG(1/2 + q/2, 1/sigma_aux + sum(r^2 / (2 s^2))), then
    sigma_aux ~ IG(1, 1 + 1/sigma^2).
    """
    gen = as_generator(rng)
    if resid is None:
        layout = layout or edge_layout(state.V)
        resid = state.gamma - state.low_rank_mean(layout)
    q = state.s2.shape[0]
    rate = 1.0 / state.sigma_aux + float(np.sum(resid ** 2 / (2.0 * state.s2)))
    state.sigma2 = sample_inverse_gamma(0.5 + q / 2.0, rate, gen)
    state.sigma_aux = sample_inverse_gamma(1.0, 1.0 + 1.0 / state.sigma2, gen)
    return state.sigma2, state.sigma_aux


def log_posterior(state: ChainStateHorseshoe, data: NetworkDataset, prior,
                  layout: Optional[EdgeLayout] = None) -> float:
    """Unnormalized log joint density of the Network Horseshoe model (omega integrated out)."""
    total = log_posterior_common(state, data, prior, layout)
    total += float(np.sum(stats.invgamma.logpdf(state.s2, 0.5, scale=1.0 / state.nu_aux)))
    total += float(np.sum(stats.invgamma.logpdf(state.nu_aux, 0.5, scale=1.0)))
    total += float(stats.invgamma.logpdf(state.sigma2, 0.5, scale=1.0 / state.sigma_aux))
    total += float(stats.invgamma.logpdf(state.sigma_aux, 0.5, scale=1.0))
    return total


def sample_prior(V: int, prior, rng, mu: float = 0.0) -> ChainStateHorseshoe:
    """Forward draw of every Network Horseshoe block from its prior."""
    gen = as_generator(rng)
    structure = draw_prior_structure(V, prior, gen)
    q = V * (V - 1) // 2
    sigma_aux = sample_inverse_gamma(0.5, 1.0, gen)
    sigma2 = sample_inverse_gamma(0.5, 1.0 / sigma_aux, gen)
    nu_aux = np.atleast_1d(sample_inverse_gamma(np.full(q, 0.5), 1.0, gen))
    s2 = np.atleast_1d(sample_inverse_gamma(0.5, 1.0 / nu_aux, gen))
    state = ChainStateHorseshoe(
        mu=float(mu), gamma=np.zeros(q), s2=s2, omega=np.empty(0),
        sigma2=sigma2, nu_aux=nu_aux, sigma_aux=sigma_aux, **structure
    )
    return finish_prior_state(state, gen)


class HorseshoeSampler(NetworkGibbsSampler):
    """Gibbs chain for the Bayesian Network Horseshoe classifier."""

    kind = "bnhc"
    state_cls = ChainStateHorseshoe
    global_scale = "sigma2"

    def initial_scales(self, q: int) -> dict:
        return {"sigma2": 1.0, "nu_aux": np.ones(q), "sigma_aux": 1.0}

    def update_scales(self, state: ChainStateHorseshoe) -> None:
        resid = state.gamma - state.low_rank_mean(self.layout)
        update_local_scales_hs(state, self.rng.generator, resid)
        update_global_scale_hs(state, self.rng.generator, resid)

    def log_posterior(self, state: ChainStateHorseshoe) -> float:
        return log_posterior(state, self.data, self.prior, self.layout)

    def prior_draw(self, mu: float = 0.0) -> ChainStateHorseshoe:
        return sample_prior(self.data.V, self.prior, self.rng.generator, mu)
