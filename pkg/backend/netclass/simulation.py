"""
Synthetic networks, coefficients and labels.

The true coefficient matrix is low rank plus sparse: Gamma0 = Gamma01 + Gamma02
with Gamma01[k, l] = u_k'u_l / 2 from sparse latent positions and Gamma02 a
few residual entries. Networks come either from independent N(0, 1) edges
(sim1) or from a three-community block model (sim2), and labels from the
logistic model with intercept mu0.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np
from scipy.special import expit

from .config import SimConfig
from .distributions import RngStream, as_generator
from .errors import ValidationError
from .network import AdjacencyMatrix, NetworkDataset, devectorize, edge_index, n_edges

logger = logging.getLogger(__name__)

# Residual entry values per strategy: (mean, variance); variance 0 means constant.
STRATEGIES = {1: (1.0, 0.1), 2: (0.5, 0.1), 3: (0.5, 0.0)}


@dataclass(frozen=True)
class GroundTruth:
    """
    Generating coefficients.

    ``gamma0`` is the edge-vector form of ``Gamma0`` (gamma = 2 Gamma off the
    diagonal); ``active_edges`` is its support.
    """

    Gamma0: np.ndarray
    gamma0: np.ndarray
    u0: np.ndarray
    active_nodes: np.ndarray
    active_residual_edges: np.ndarray
    mu0: float

    @property
    def V(self) -> int:
        return self.u0.shape[0]

    @property
    def active_edges(self) -> np.ndarray:
        return np.flatnonzero(self.gamma0)

    @property
    def low_rank_part(self) -> np.ndarray:
        """Gamma01 as a V x V matrix."""
        G = self.u0 @ self.u0.T / 2.0
        np.fill_diagonal(G, 0.0)
        return G

    def to_dict(self) -> dict:
        return {
            "V": self.V,
            "mu0": self.mu0,
            "gamma0": self.gamma0,
            "u0": self.u0,
            "active_nodes": [int(k) + 1 for k in self.active_nodes],
            "active_residual_edges": [int(j) for j in self.active_residual_edges],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GroundTruth":
        gamma0 = np.asarray(payload["gamma0"], dtype=float)
        return cls(
            Gamma0=devectorize(gamma0).entries / 2.0,
            gamma0=gamma0,
            u0=np.asarray(payload["u0"], dtype=float).reshape(int(payload["V"]), -1),
            active_nodes=np.asarray(payload["active_nodes"], dtype=int) - 1,
            active_residual_edges=np.asarray(payload["active_residual_edges"], dtype=int),
            mu0=float(payload["mu0"]),
        )


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5 + 1e-9))


def generate_coefficients(cfg: SimConfig, rng) -> GroundTruth:
    """
    Draw the true coefficients.

    Each node is active with probability 1 - node_sparsity; active nodes get
    u_k ~ N(u_mean 1, u_sd^2 I) in R_g dimensions, inactive ones u_k = 0.
    round((1 - residual_sparsity) q) residual entries of Gamma02 are placed
    uniformly without replacement, valued by the configured strategy.
    """
    gen = as_generator(rng)
    V, q = cfg.V, n_edges(cfg.V)
    rows, cols = edge_index(V)

    active = gen.random(V) < 1.0 - cfg.node_sparsity
    u0 = np.zeros((V, cfg.R_g))
    u0[active] = cfg.u_mean + cfg.u_sd * gen.standard_normal((int(active.sum()), cfg.R_g))
    gamma_low_rank = np.einsum("er,er->e", u0[rows], u0[cols])

    n_resid = _round_half_up((1.0 - cfg.residual_sparsity) * q)
    positions = np.sort(gen.choice(q, size=n_resid, replace=False))
    mean, var = STRATEGIES[cfg.strategy]
    values = mean + np.sqrt(var) * gen.standard_normal(n_resid) if var > 0 else np.full(n_resid, mean)
    gamma_resid = np.zeros(q)
    gamma_resid[positions] = 2.0 * values

    gamma0 = gamma_low_rank + gamma_resid
    truth = GroundTruth(
        Gamma0=devectorize(gamma0).entries / 2.0,
        gamma0=gamma0,
        u0=u0,
        active_nodes=np.flatnonzero(active),
        active_residual_edges=positions,
        mu0=cfg.mu0,
    )
    logger.debug("truth: %d active nodes, %d residual edges", truth.active_nodes.size, n_resid)
    return truth


def community_assignment(cfg: SimConfig) -> np.ndarray:
    """Community index of every node: contiguous blocks of the configured sizes."""
    return np.repeat(np.arange(len(cfg.community_sizes)), cfg.community_sizes)


def between_community_edges(cfg: SimConfig) -> np.ndarray:
    """
    Edge positions that carry between-community signal in sim2.

    A ``between_fraction`` share of all between-community pairs, drawn once
    from the scenario seed and shared by every subject.
    """
    rows, cols = edge_index(cfg.V)
    block = community_assignment(cfg)
    between = np.flatnonzero(block[rows] != block[cols])
    count = _round_half_up(cfg.between_fraction * between.size)
    gen = RngStream(cfg.seed).substream(3).generator
    return np.sort(gen.choice(between, size=count, replace=False))


def _subject_generator(rng, i: int) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.substream(i).generator
    return as_generator(rng)


def generate_edge_matrix(cfg: SimConfig, rng, n: Optional[int] = None) -> np.ndarray:
    """n x q matrix of vectorized networks; one substream per subject."""
    n = cfg.n if n is None else n
    q = n_edges(cfg.V)
    X = np.zeros((n, q))
    if cfg.scenario == "sim1":
        for i in range(n):
            X[i] = _subject_generator(rng, i).standard_normal(q)
        return X

    rows, cols = edge_index(cfg.V)
    block = community_assignment(cfg)
    within = np.flatnonzero(block[rows] == block[cols])
    between = between_community_edges(cfg)
    sd = np.sqrt(cfg.within_var)
    for i in range(n):
        gen = _subject_generator(rng, i)
        X[i, within] = cfg.within_mean + sd * gen.standard_normal(within.size)
        X[i, between] = gen.standard_normal(between.size)
    return X


def generate_networks(cfg: SimConfig, rng, n: Optional[int] = None) -> List[AdjacencyMatrix]:
    """Simulated networks as adjacency matrices."""
    return [devectorize(x) for x in generate_edge_matrix(cfg, rng, n)]


def generate_responses(networks: Union[np.ndarray, List[AdjacencyMatrix]], truth: GroundTruth,
                       mu0: float, rng) -> np.ndarray:
    """
    y_i ~ Bernoulli(logistic(mu0 + <A_i, Gamma0>_F)).

    ``networks`` is either an n x q edge matrix or a list of adjacency matrices.
    """
    if isinstance(networks, np.ndarray) and networks.ndim == 2:
        X = networks
    else:
        X = NetworkDataset.from_networks(networks, np.zeros(len(networks)), V=truth.V).edges
    if X.shape[1] != truth.gamma0.shape[0]:
        raise ValidationError(f"networks have {X.shape[1]} edges, truth has {truth.gamma0.shape[0]}")
    prob = expit(mu0 + X @ truth.gamma0)
    return (as_generator(rng).random(X.shape[0]) < prob).astype(np.int8)


@dataclass(frozen=True)
class Simulation:
    train: NetworkDataset
    truth: GroundTruth
    test: Optional[NetworkDataset] = None


def simulate_dataset(cfg: SimConfig, truth: GroundTruth, n: int, rng: RngStream) -> NetworkDataset:
    X = generate_edge_matrix(cfg, rng.substream(0), n)
    y = generate_responses(X, truth, cfg.mu0, rng.substream(1))
    return NetworkDataset(X, y, V=cfg.V)


def simulate(cfg: SimConfig, n_test: int = 0) -> Simulation:
    """
    Truth, training set and optional test set for a scenario.

    Everything derives from ``cfg.seed``, so the same config always yields the
    same data.
    """
    root = RngStream(cfg.seed)
    truth = generate_coefficients(cfg, root.substream(0))
    train = simulate_dataset(cfg, truth, cfg.n, root.substream(1))
    test = simulate_dataset(cfg, truth, n_test, root.substream(2)) if n_test else None
    logger.info(
        "simulated %s: V=%d n=%d, %d active nodes, label mean %.3f",
        cfg.scenario, cfg.V, cfg.n, truth.active_nodes.size,
        float(np.mean(train.labels)) if train.n else float("nan"),
    )
    return Simulation(train, truth, test)
