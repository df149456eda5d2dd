"""
Convergence diagnostics and the Geweke joint-distribution check.

ESS is the initial-monotone-sequence estimator and R-hat the split version,
both from ``arviz`` on (chain, draw) arrays.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import arviz as az
import numpy as np
import pandas as pd
from scipy.special import expit

from .config import McmcConfig
from .distributions import RngStream
from .errors import DiagnosticsError, ValidationError
from .gibbs.runner import sampler_for
from .network import NetworkDataset
from .posterior import PosteriorSamples

logger = logging.getLogger(__name__)

MIN_DRAWS = 4
RHAT_WARNING = 1.1
N_GAMMA_TRACKED = 5
ACF_LAGS = (1, 5, 10)


def _as_chains(trace: np.ndarray) -> np.ndarray:
    arr = np.asarray(trace, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DiagnosticsError(f"trace must be (chain, draw), got shape {arr.shape}")
    if arr.shape[1] < MIN_DRAWS:
        raise DiagnosticsError(f"chains have {arr.shape[1]} draws; at least {MIN_DRAWS} are needed")
    return arr


def effective_sample_size(trace: np.ndarray) -> float:
    """ESS of a (chain, draw) or single-chain trace; a constant trace counts every draw."""
    arr = _as_chains(trace)
    if np.ptp(arr) == 0:
        return float(arr.size)
    return float(az.ess(arr, method="mean"))


def split_rhat(trace: np.ndarray) -> float:
    """Split R-hat; 1.0 for a constant trace."""
    arr = _as_chains(trace)
    if np.ptp(arr) == 0:
        return 1.0
    return float(az.rhat(arr, method="split"))


def autocorrelation(trace: np.ndarray, lags=ACF_LAGS) -> Dict[int, float]:
    """Lag-k autocorrelations of a single chain (the first one if several)."""
    arr = _as_chains(trace)[0]
    if np.ptp(arr) == 0:
        return {int(k): float("nan") for k in lags}
    acf = az.autocorr(arr)
    return {int(k): float(acf[k]) if k < acf.shape[0] else float("nan") for k in lags}


@dataclass
class DiagnosticsReport:
    table: pd.DataFrame
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"parameters": self.table.to_dict(orient="records"), "warnings": list(self.warnings)}


def tracked_edges(q: int, n: int = N_GAMMA_TRACKED) -> np.ndarray:
    """Fixed pseudo-random subset of edge positions followed by the diagnostics."""
    gen = np.random.default_rng(20240601)
    return np.sort(gen.choice(q, size=min(n, q), replace=False))


def diagnostics(samples: PosteriorSamples) -> DiagnosticsReport:
    """
    ESS, autocorrelations and split R-hat for mu, the active-node fraction,
    the number of active ranks and a fixed subset of edge coefficients.

    Raises:
        DiagnosticsError: if chains hold fewer than four draws.
    """
    traces = {
        "mu": samples.mu,
        "active_fraction": samples.xi.mean(axis=2),
        "rank": samples.lam.sum(axis=2).astype(float),
    }
    for j in tracked_edges(samples.q):
        traces[f"gamma[{j}]"] = samples.gamma[:, :, j]

    rows = []
    warnings = []
    for name, trace in traces.items():
        acf = autocorrelation(trace)
        row = {
            "parameter": name,
            "mean": float(np.mean(trace)),
            "ess": effective_sample_size(trace),
            "rhat": split_rhat(trace) if samples.n_chains > 1 else float("nan"),
        }
        row.update({f"acf_{k}": v for k, v in acf.items()})
        rows.append(row)
        if row["rhat"] > RHAT_WARNING:
            message = f"R-hat {row['rhat']:.3f} for {name} exceeds {RHAT_WARNING}"
            logger.warning(message)
            warnings.append(message)
    return DiagnosticsReport(pd.DataFrame(rows), warnings)


# ---------------------------------------------------------------------------
# Geweke joint-distribution test
# ---------------------------------------------------------------------------

Statistic = Callable[[object], float]


def default_statistics(prior_kind: str) -> Dict[str, Statistic]:
    """
    Functions of the state compared by the Geweke test.

    Heavy-tailed quantities enter through bounded or log transforms: the
    mean edge coefficient through arctan, and the horseshoe global scale on
    the log scale.
    """
    stats = {
        "delta": lambda s: float(s.delta),
        "n_active": lambda s: float(np.sum(s.xi)),
        "rank": lambda s: float(np.sum(s.lam)),
        "atan_mean_gamma": lambda s: float(np.arctan(np.mean(s.gamma))),
    }
    if prior_kind == "bnlc":
        stats["theta2"] = lambda s: float(s.theta2)
    else:
        stats["log_sigma2"] = lambda s: float(np.log(s.sigma2))
    return stats


def geweke_test(prior_kind: str, prior, X: np.ndarray, n_sweeps: int, rng: RngStream,
                statistics: Optional[Dict[str, Statistic]] = None, mu: float = 0.0) -> pd.DataFrame:
    """
    Compare forward prior-predictive draws with the successive-conditional chain.

    The marginal-conditional simulator draws the parameters from the prior and
    records each statistic. The successive-conditional simulator alternates
    one Gibbs sweep with a fresh draw of the labels given the parameters. The
    intercept is held at ``mu`` in both, since its flat prior cannot be
    sampled.

    Returns:
        One row per statistic with both means, the combined standard error and
        the z-score.
    """
    if prior.kind != prior_kind:
        raise ValidationError(f"prior kind {prior.kind} does not match {prior_kind}")
    X = np.asarray(X, dtype=float)
    statistics = statistics or default_statistics(prior_kind)
    forward_rng = rng.substream(0)
    gen = forward_rng.generator

    def draw_labels(state, generator):
        return (generator.random(X.shape[0]) < expit(state.mu + X @ state.gamma)).astype(np.int8)

    cfg = McmcConfig(total=1, burnin=0, thin=1, seed=rng.seed, frozen=frozenset({"mu"}))
    data = NetworkDataset(X, np.zeros(X.shape[0], dtype=np.int8))
    sampler = sampler_for(data, prior, cfg)
    sampler.rng = rng.substream(1)

    forward = {name: np.empty(n_sweeps) for name in statistics}
    for m in range(n_sweeps):
        state = sampler.prior_draw(mu)
        for name, fn in statistics.items():
            forward[name][m] = fn(state)

    chain = {name: np.empty(n_sweeps) for name in statistics}
    state = sampler.prior_draw(mu)
    state.omega = np.ones(X.shape[0])
    labels = draw_labels(state, gen)
    for m in range(n_sweeps):
        sampler.data = data.with_labels(labels)
        sampler.sweep(state)
        labels = draw_labels(state, gen)
        for name, fn in statistics.items():
            chain[name][m] = fn(state)

    rows = []
    for name in statistics:
        a, b = forward[name], chain[name]
        se_a = np.std(a, ddof=1) / np.sqrt(a.shape[0])
        se_b = np.std(b, ddof=1) / np.sqrt(effective_sample_size(b))
        se = float(np.hypot(se_a, se_b))
        rows.append({
            "statistic": name,
            "marginal_mean": float(np.mean(a)),
            "successive_mean": float(np.mean(b)),
            "se": se,
            "z": float((np.mean(a) - np.mean(b)) / se) if se > 0 else 0.0,
        })
    table = pd.DataFrame(rows)
    logger.info("Geweke test (%s, %d sweeps): max |z| = %.2f", prior_kind, n_sweeps, table["z"].abs().max())
    return table
