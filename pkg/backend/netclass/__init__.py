"""Bayesian classification of subjects from network predictors."""

from .config import (
    McmcConfig,
    PriorSpecHorseshoe,
    PriorSpecLasso,
    RunConfig,
    SimConfig,
    make_prior,
    sim_preset,
)
from .errors import DiagnosticsError, FormatError, NetclassError, SamplerError, ValidationError
from .gibbs import run_chain_bnhc, run_chain_bnlc, run_chains
from .network import AdjacencyMatrix, EdgeVector, NetworkDataset, devectorize, vectorize_upper
from .posterior import PosteriorSamples, classify, infer, predict_proba
from .simulation import simulate

__version__ = "0.1.0"
