"""Mutable MCMC state for one chain."""

from dataclasses import dataclass, fields
from typing import Dict

import numpy as np

from ..errors import SamplerError
from ..network import EdgeLayout


@dataclass
class ChainState:
    """
    Parameters shared by both priors.

    ``lam`` holds the rank indicators (lambda_r); ``u`` is V x R with row k
    identically zero exactly when ``xi[k] == 0``.
    """

    mu: float
    gamma: np.ndarray
    u: np.ndarray
    xi: np.ndarray
    lam: np.ndarray
    pi_r: np.ndarray
    s2: np.ndarray
    delta: float
    Q: np.ndarray
    omega: np.ndarray

    @property
    def V(self) -> int:
        return self.u.shape[0]

    @property
    def R(self) -> int:
        return self.u.shape[1]

    def edge_variances(self) -> np.ndarray:
        """Diagonal of D, the prior variances of gamma around W."""
        return self.s2

    def low_rank_mean(self, layout: EdgeLayout) -> np.ndarray:
        """W with W_{k,l} = u_k' Lambda u_l in canonical edge order."""
        scaled = self.u * self.lam
        return np.einsum("er,er->e", scaled[layout.rows], self.u[layout.cols])

    def copy(self) -> "ChainState":
        values = {}
        for f in fields(self):
            value = getattr(self, f.name)
            values[f.name] = value.copy() if isinstance(value, np.ndarray) else value
        return type(self)(**values)

    def scalar_summaries(self) -> Dict[str, float]:
        return {
            "mu": float(self.mu),
            "delta": float(self.delta),
            "n_active": float(np.sum(self.xi)),
            "rank": float(np.sum(self.lam)),
        }

    def check(self) -> None:
        """
        Raise SamplerError if a structural invariant is broken.

        Checked: spike-slab consistency, positive variances, finite values.
        """
        zero_rows = ~np.any(self.u != 0, axis=1)
        if np.any(zero_rows != (self.xi == 0)):
            k = int(np.argmax(zero_rows != (self.xi == 0)))
            raise SamplerError(f"node {k + 1}: xi={int(self.xi[k])} disagrees with its latent position")
        if np.any(~(self.s2 > 0)) or np.any(~(self.omega > 0)):
            raise SamplerError("nonpositive local scale or Polya-Gamma auxiliary")
        if not (np.isfinite(self.mu) and np.all(np.isfinite(self.gamma))):
            raise SamplerError("non-finite mu or gamma")
        if not 0.0 <= self.delta <= 1.0:
            raise SamplerError(f"node sparsity {self.delta} outside [0, 1]")


@dataclass
class ChainStateLasso(ChainState):
    theta2: float = 1.0

    def scalar_summaries(self) -> Dict[str, float]:
        out = super().scalar_summaries()
        out["theta2"] = float(self.theta2)
        return out

    def check(self) -> None:
        super().check()
        if not self.theta2 > 0:
            raise SamplerError(f"global scale theta2={self.theta2} is not positive")


@dataclass
class ChainStateHorseshoe(ChainState):
    sigma2: float = 1.0
    nu_aux: np.ndarray = None
    sigma_aux: float = 1.0

    def __post_init__(self):
        if self.nu_aux is None:
            self.nu_aux = np.ones_like(self.s2)

    def edge_variances(self) -> np.ndarray:
        return self.sigma2 * self.s2

    def scalar_summaries(self) -> Dict[str, float]:
        out = super().scalar_summaries()
        out["sigma2"] = float(self.sigma2)
        return out

    def check(self) -> None:
        super().check()
        if not (self.sigma2 > 0 and self.sigma_aux > 0 and np.all(self.nu_aux > 0)):
            raise SamplerError("nonpositive horseshoe scale or augmentation variable")
