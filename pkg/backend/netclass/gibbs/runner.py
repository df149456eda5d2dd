"""Running one or more chains and stacking their draws."""

import logging
from typing import Dict, List, Optional, Type

import numpy as np
from joblib import Parallel, delayed

from ..config import McmcConfig, PriorSpecHorseshoe, PriorSpecLasso, worker_count
from ..errors import ValidationError
from ..network import NetworkDataset
from ..posterior import PosteriorSamples
from .common import ChainTrace, NetworkGibbsSampler
from .horseshoe import HorseshoeSampler
from .lasso import LassoSampler

logger = logging.getLogger(__name__)

SAMPLERS: Dict[str, Type[NetworkGibbsSampler]] = {
    "bnlc": LassoSampler,
    "bnhc": HorseshoeSampler,
}


def sampler_for(data: NetworkDataset, prior, cfg: Optional[McmcConfig] = None,
                chain: int = 0) -> NetworkGibbsSampler:
    try:
        cls = SAMPLERS[prior.kind]
    except KeyError:
        raise ValidationError(f"unknown prior kind {prior.kind!r}")
    return cls(data, prior, cfg, chain)


def _run_one(data: NetworkDataset, prior, cfg: McmcConfig, chain: int) -> ChainTrace:
    return sampler_for(data, prior, cfg, chain).run()


def stack_traces(traces: List[ChainTrace], prior, cfg: McmcConfig) -> PosteriorSamples:
    traces = sorted(traces, key=lambda t: t.chain)
    extras = {name: np.stack([t.extras[name] for t in traces]) for name in traces[0].extras}
    return PosteriorSamples(
        mu=np.stack([t.mu for t in traces]),
        gamma=np.stack([t.gamma for t in traces]),
        xi=np.stack([t.xi for t in traces]),
        lam=np.stack([t.lam for t in traces]),
        prior_kind=prior.kind,
        seed=cfg.seed,
        config={"prior": prior.model_dump(mode="json"), "mcmc": cfg.model_dump(mode="json")},
        extras=extras,
    )


def run_chains(data: NetworkDataset, prior, cfg: Optional[McmcConfig] = None,
               n_jobs: Optional[int] = None) -> PosteriorSamples:
    """
    Run ``cfg.chains`` independent chains and stack their retained draws.

    Chain i draws from stream i of ``cfg.seed``, so the output does not
    depend on how many workers run the chains.

    Raises:
        ValidationError: on an empty dataset or a prior/data mismatch.
        SamplerError: from the first failing chain, with chain id and sweep.
    """
    cfg = cfg or McmcConfig()
    if data.V < 2:
        raise ValidationError("networks need at least two nodes")
    n_jobs = n_jobs or worker_count(cfg.chains)
    logger.info("running %d %s chain(s) on %d worker(s)", cfg.chains, prior.kind, n_jobs)
    if n_jobs == 1 or cfg.chains == 1:
        traces = [_run_one(data, prior, cfg, c) for c in range(cfg.chains)]
    else:
        traces = Parallel(n_jobs=n_jobs)(delayed(_run_one)(data, prior, cfg, c) for c in range(cfg.chains))
    return stack_traces(traces, prior, cfg)


def run_chain_bnlc(data: NetworkDataset, prior: Optional[PriorSpecLasso] = None,
                   cfg: Optional[McmcConfig] = None) -> PosteriorSamples:
    """Bayesian Network Lasso classifier fit."""
    prior = prior or PriorSpecLasso()
    if data.n == 0:
        raise ValidationError("cannot fit an empty dataset")
    return run_chains(data, prior, cfg)


def run_chain_bnhc(data: NetworkDataset, prior: Optional[PriorSpecHorseshoe] = None,
                   cfg: Optional[McmcConfig] = None) -> PosteriorSamples:
    """Bayesian Network Horseshoe classifier fit."""
    prior = prior or PriorSpecHorseshoe()
    if data.n == 0:
        raise ValidationError("cannot fit an empty dataset")
    return run_chains(data, prior, cfg)
