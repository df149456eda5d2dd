"""
Posterior summaries.

Turns retained draws into class probabilities for new networks, influential
nodes, FDR-controlled influential edges, the effective dimensionality of the
latent space and per-edge coefficient summaries.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .network import AdjacencyMatrix, edge_index, n_edges, vectorize_upper

logger = logging.getLogger(__name__)

DEFAULT_EDGE_THRESHOLD = 0.05
DEFAULT_FDR = 0.05


@dataclass(frozen=True)
class PosteriorSamples:
    """
    Thinned post-burn-in draws, stacked by chain.

    Arrays have a leading (chain, draw) pair of axes: ``mu`` is C x L,
    ``gamma`` C x L x q, ``xi`` C x L x V and ``lam`` C x L x R. ``extras``
    holds further C x L scalar traces (Delta, the global scale, the log
    posterior).
    """

    mu: np.ndarray
    gamma: np.ndarray
    xi: np.ndarray
    lam: np.ndarray
    prior_kind: str = "bnlc"
    seed: int = 0
    config: Dict = field(default_factory=dict)
    extras: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        xi = np.asarray(self.xi, dtype=np.int8)
        lam = np.asarray(self.lam, dtype=np.int8)
        if mu.ndim != 2 or gamma.ndim != 3 or xi.ndim != 3 or lam.ndim != 3:
            raise ValidationError("posterior arrays must be stacked as (chain, draw, ...)")
        shape = mu.shape
        for name, arr in (("gamma", gamma), ("xi", xi), ("lambda", lam)):
            if arr.shape[:2] != shape:
                raise ValidationError(f"{name} draws have shape {arr.shape[:2]}, expected {shape}")
        if shape[0] < 1 or shape[1] < 1:
            raise ValidationError("posterior samples need at least one draw")
        if gamma.shape[2] != n_edges(xi.shape[2]):
            raise ValidationError(
                f"gamma has {gamma.shape[2]} edges but xi has {xi.shape[2]} nodes"
            )
        extras = {}
        for name, arr in self.extras.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != shape:
                raise ValidationError(f"trace {name!r} has shape {arr.shape}, expected {shape}")
            extras[name] = arr
        for name, arr in (("mu", mu), ("gamma", gamma), ("xi", xi), ("lam", lam)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "extras", extras)

    @classmethod
    def single_chain(cls, mu, gamma, xi, lam, **kwargs) -> "PosteriorSamples":
        """Wrap one chain's L x ... draws."""
        return cls(np.asarray(mu)[None], np.asarray(gamma)[None], np.asarray(xi)[None],
                   np.asarray(lam)[None], **kwargs)

    @property
    def n_chains(self) -> int:
        return self.mu.shape[0]

    @property
    def draws_per_chain(self) -> int:
        return self.mu.shape[1]

    @property
    def n_draws(self) -> int:
        return self.mu.size

    @property
    def V(self) -> int:
        return self.xi.shape[2]

    @property
    def R(self) -> int:
        return self.lam.shape[2]

    @property
    def q(self) -> int:
        return self.gamma.shape[2]

    def pooled(self, name: str) -> np.ndarray:
        """Draws of ``name`` with the chain axis folded into the draw axis."""
        arr = getattr(self, name) if name in ("mu", "gamma", "xi", "lam") else self.extras[name]
        return arr.reshape((self.n_draws,) + arr.shape[2:])


@dataclass(frozen=True)
class RankDistribution:
    """Posterior distribution of the number of active latent dimensions."""

    probs: np.ndarray
    mean: float
    mode: int


@dataclass
class InferenceReport:
    """Node, edge and rank inference from one set of posterior samples."""

    node_probs: np.ndarray
    selected_nodes: np.ndarray
    edge_probs: np.ndarray
    selected_edges: np.ndarray
    fdr_bound: float
    fdr_level: float
    edge_threshold: float
    reff: RankDistribution
    gamma_mean: np.ndarray
    gamma_lower: np.ndarray
    gamma_upper: np.ndarray
    credible_level: float = 0.95
    class_threshold: float = 0.5
    warnings: List[str] = field(default_factory=list)

    @property
    def V(self) -> int:
        return self.node_probs.shape[0]

    def to_dict(self) -> dict:
        """JSON-ready view with 1-based node labels."""
        rows, cols = edge_index(self.V)
        return {
            "node_probs": self.node_probs,
            "selected_nodes": [int(k) + 1 for k in self.selected_nodes],
            "edge_probs": self.edge_probs,
            "selected_edges": [[int(rows[j]) + 1, int(cols[j]) + 1] for j in self.selected_edges],
            "fdr_bound": self.fdr_bound,
            "fdr_level": self.fdr_level,
            "edge_threshold": self.edge_threshold,
            "reff_probs": self.reff.probs,
            "reff_mean": self.reff.mean,
            "reff_mode": self.reff.mode,
            "gamma_mean": self.gamma_mean,
            "gamma_lower": self.gamma_lower,
            "gamma_upper": self.gamma_upper,
            "credible_level": self.credible_level,
            "class_threshold": self.class_threshold,
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def predict_proba(samples: PosteriorSamples, edges: np.ndarray) -> np.ndarray:
    """
    Posterior-averaged class probabilities for the rows of an m x q edge matrix.

    Each row gets (1/L) sum_l logistic(mu^(l) + x' gamma^(l)).
    """
    X = np.atleast_2d(np.asarray(edges, dtype=float))
    if X.shape[1] != samples.q:
        raise ValidationError(f"networks have {X.shape[1]} edges, samples have {samples.q}")
    psi = samples.pooled("mu")[:, None] + samples.pooled("gamma") @ X.T
    return expit(psi).mean(axis=0)


def classify(samples: PosteriorSamples,
             new_network: Union[AdjacencyMatrix, np.ndarray]) -> Tuple[float, int]:
    """
    Score one network.

    Returns:
        (probability, label) with label 1 ("high") iff probability > 0.5;
        a probability of exactly 0.5 is labeled 0 ("low").
    """
    x = vectorize_upper(new_network).values
    if x.shape[0] != samples.q:
        raise ValidationError(
            f"network has {x.shape[0]} edges (V={vectorize_upper(new_network).V}), samples expect V={samples.V}"
        )
    prob = float(predict_proba(samples, x[None])[0])
    return prob, int(prob > 0.5)


# ---------------------------------------------------------------------------
# Nodes, edges, rank
# ---------------------------------------------------------------------------

def select_nodes(samples: PosteriorSamples) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior inclusion frequency of every node and the 0-based indices whose
    frequency is strictly above 0.5.
    """
    node_probs = samples.pooled("xi").mean(axis=0)
    return node_probs, np.flatnonzero(node_probs > 0.5)


def exceedance_probabilities(samples: PosteriorSamples, threshold: float) -> np.ndarray:
    """d_j = fraction of draws with |gamma_j| > threshold."""
    return (np.abs(samples.pooled("gamma")) > threshold).mean(axis=0)


def fdr_select(probs: np.ndarray, alpha: float) -> Tuple[np.ndarray, float]:
    """
    Bayesian FDR rule on exceedance probabilities.

    Sort by probability (descending, stable) and keep the largest prefix whose
    mean of (1 - d) is at most ``alpha``.

    Returns:
        (selected indices in selection order, achieved bound); the bound is 0
        for an empty selection.
    """
    d = np.asarray(probs, dtype=float)
    if not 0 < alpha < 1:
        raise ValidationError(f"FDR level must lie in (0, 1), got {alpha}")
    order = np.argsort(-d, kind="stable")
    running = np.cumsum(1.0 - d[order]) / np.arange(1, d.shape[0] + 1)
    size = int(np.sum(running <= alpha + 1e-12))
    bound = float(running[size - 1]) if size else 0.0
    return order[:size], bound


def select_edges_fdr(samples: PosteriorSamples, t: float = DEFAULT_EDGE_THRESHOLD,
                     alpha: float = DEFAULT_FDR) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Influential edges at effect threshold ``t`` and FDR level ``alpha``.

    Returns:
        (edge_probs, selected edge positions sorted ascending, achieved bound)
    """
    if t <= 0:
        raise ValidationError(f"edge threshold must be positive, got {t}")
    edge_probs = exceedance_probabilities(samples, t)
    selected, bound = fdr_select(edge_probs, alpha)
    return edge_probs, np.sort(selected), bound


def effective_dimensionality(samples: PosteriorSamples) -> RankDistribution:
    """Empirical distribution of sum_r lambda_r over 0..R, with its mean and mode."""
    ranks = samples.pooled("lam").sum(axis=1).astype(int)
    counts = np.bincount(ranks, minlength=samples.R + 1)
    probs = counts / counts.sum()
    return RankDistribution(probs=probs, mean=float(ranks.mean()), mode=int(np.argmax(counts)))


def summarize_coefficients(samples: PosteriorSamples,
                           level: float = 0.95) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Posterior mean and equal-tailed credible interval of every edge coefficient.

    Returns:
        (mean, lower, upper), each of length q.
    """
    if not 0 < level < 1:
        raise ValidationError(f"credible level must lie in (0, 1), got {level}")
    draws = samples.pooled("gamma")
    tail = (1.0 - level) / 2.0
    lower, upper = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    return draws.mean(axis=0), lower, upper


def infer(samples: PosteriorSamples, edge_threshold: float = DEFAULT_EDGE_THRESHOLD,
          fdr: float = DEFAULT_FDR, credible_level: float = 0.95) -> InferenceReport:
    """Run every posterior summary and collect them in an InferenceReport."""
    node_probs, nodes = select_nodes(samples)
    edge_probs, edges, bound = select_edges_fdr(samples, edge_threshold, fdr)
    mean, lower, upper = summarize_coefficients(samples, credible_level)
    report = InferenceReport(
        node_probs=node_probs,
        selected_nodes=nodes,
        edge_probs=edge_probs,
        selected_edges=edges,
        fdr_bound=bound,
        fdr_level=fdr,
        edge_threshold=edge_threshold,
        reff=effective_dimensionality(samples),
        gamma_mean=mean,
        gamma_lower=lower,
        gamma_upper=upper,
        credible_level=credible_level,
    )
    logger.info(
        "%d influential nodes, %d influential edges (FDR bound %.3f), R_eff mode %d",
        nodes.size, edges.size, bound, report.reff.mode,
    )
    return report


# ---------------------------------------------------------------------------
# Comparing fits
# ---------------------------------------------------------------------------

def compare_edge_selections(selected_a: Sequence[int], selected_b: Sequence[int],
                            gamma_mean_a: np.ndarray, gamma_mean_b: np.ndarray,
                            tops: Sequence[int] = (10, 20, 30)) -> dict:
    """
    Overlap between the edge sets of two fits.

    ``frac_of_a`` is |A and B| / |A| (0 when A is empty), likewise for B.
    ``top_overlap[k]`` counts edges shared by the k largest |posterior mean|
    edges of each fit.
    """
    a = set(int(j) for j in selected_a)
    b = set(int(j) for j in selected_b)
    both = a & b
    mean_a = np.abs(np.asarray(gamma_mean_a, dtype=float))
    mean_b = np.abs(np.asarray(gamma_mean_b, dtype=float))
    if mean_a.shape != mean_b.shape:
        raise ValidationError("posterior means of the two fits differ in length")
    top_overlap = {}
    for k in tops:
        top_a = set(np.argsort(-mean_a, kind="stable")[:k].tolist())
        top_b = set(np.argsort(-mean_b, kind="stable")[:k].tolist())
        top_overlap[int(k)] = len(top_a & top_b)
    return {
        "n_both": len(both),
        "frac_of_a": len(both) / len(a) if a else 0.0,
        "frac_of_b": len(both) / len(b) if b else 0.0,
        "top_overlap": top_overlap,
    }


def influential_subnetwork(report: InferenceReport) -> nx.Graph:
    """
    Graph of the selected nodes and selected edges.

    Nodes carry 1-based labels and a ``prob`` attribute (posterior inclusion
    frequency); edges carry ``prob`` (exceedance probability) and ``mean``.
    Endpoints of selected edges are included even when not selected themselves.
    """
    graph = nx.Graph()
    rows, cols = edge_index(report.V)
    for k in report.selected_nodes:
        graph.add_node(int(k) + 1, prob=float(report.node_probs[k]), selected=True)
    for j in report.selected_edges:
        k, l = int(rows[j]), int(cols[j])
        for node in (k, l):
            if not graph.has_node(node + 1):
                graph.add_node(node + 1, prob=float(report.node_probs[node]), selected=False)
        graph.add_edge(k + 1, l + 1, prob=float(report.edge_probs[j]), mean=float(report.gamma_mean[j]))
    return graph
