"""Gibbs samplers for the Network Lasso and Network Horseshoe classifiers."""

from .common import (
    ChainTrace,
    NetworkGibbsSampler,
    update_gamma,
    update_latent_positions,
    update_mu,
    update_node_sparsity,
    update_omega,
    update_Q,
    update_rank_indicators,
)
from .horseshoe import HorseshoeSampler, update_global_scale_hs, update_local_scales_hs
from .lasso import LassoSampler, update_local_scales
from .runner import run_chain_bnhc, run_chain_bnlc, run_chains, sampler_for
from .state import ChainState, ChainStateHorseshoe, ChainStateLasso
