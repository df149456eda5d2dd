"""
Configuration objects.

All configuration is expressed as pydantic models so that a run can be saved
to JSON, reloaded and re-executed identically.
"""

import logging
import os
from typing import Annotated, Dict, FrozenSet, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

from .errors import ValidationError

logger = logging.getLogger(__name__)

PriorKind = Literal["bnlc", "bnhc"]

# Parameter blocks of one Gibbs sweep, in sweep order.
BLOCKS = ("omega", "mu", "gamma", "scales", "positions", "delta", "Q", "ranks")
Block = Literal["omega", "mu", "gamma", "scales", "positions", "delta", "Q", "ranks"]

THREADS_ENV = "NETCLASS_THREADS"


class _PriorBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    R: int = Field(5, ge=1, description="maximum latent dimension")
    nu: float = Field(20.0, description="inverse-Wishart degrees of freedom")
    a_delta: float = Field(1.0, gt=0)
    b_delta: float = Field(1.0, gt=0)
    eta: float = Field(2.0, gt=1, description="rank penalty exponent")

    @model_validator(mode="after")
    def _check_nu(self):
        if self.nu <= self.R - 1:
            raise ValueError(f"nu must exceed R - 1 (nu={self.nu}, R={self.R})")
        return self


class PriorSpecLasso(_PriorBase):
    """Network Lasso hyperparameters; theta^2 ~ Gamma(zeta, rate iota)."""

    kind: Literal["bnlc"] = "bnlc"
    zeta: float = Field(1.0, gt=0)
    iota: float = Field(1.0, gt=0)


class PriorSpecHorseshoe(_PriorBase):
    """Network Horseshoe hyperparameters; local and global scales are half-Cauchy."""

    kind: Literal["bnhc"] = "bnhc"


PriorSpec = Annotated[Union[PriorSpecLasso, PriorSpecHorseshoe], Field(discriminator="kind")]


def make_prior(kind: str, **overrides) -> Union[PriorSpecLasso, PriorSpecHorseshoe]:
    """Build the prior of the given kind, dropping overrides it does not know."""
    if kind == "bnlc":
        cls = PriorSpecLasso
    elif kind == "bnhc":
        cls = PriorSpecHorseshoe
    else:
        raise ValidationError(f"unknown prior kind {kind!r}; expected 'bnlc' or 'bnhc'")
    fields = {k: v for k, v in overrides.items() if k in cls.model_fields and k != "kind" and v is not None}
    return cls(**fields)


class McmcConfig(BaseModel):
    """
    Chain lengths and seeding.

    Sweeps are numbered 1..total; sweep t is retained when t > burnin and
    (t - burnin) is a multiple of thin.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    total: int = Field(50000, ge=1)
    burnin: int = Field(30000, ge=0)
    thin: int = Field(10, ge=1)
    chains: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    frozen: FrozenSet[Block] = frozenset()
    progress: bool = False
    log_every: int = Field(1000, ge=1)

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.burnin >= self.total:
            raise ValueError(f"burnin ({self.burnin}) must be smaller than total ({self.total})")
        if self.total - self.burnin < self.thin:
            raise ValueError("no draws retained: total - burnin is smaller than thin")
        return self

    @property
    def n_retained(self) -> int:
        return (self.total - self.burnin) // self.thin

    def is_retained(self, sweep: int) -> bool:
        return sweep > self.burnin and (sweep - self.burnin) % self.thin == 0

    @field_serializer("frozen")
    def _sorted_blocks(self, frozen):
        return sorted(frozen, key=BLOCKS.index)


class SimConfig(BaseModel):
    """
    Synthetic-data scenario.

    ``node_sparsity`` is the probability that a node is inactive and
    ``residual_sparsity`` the fraction of edges without a residual effect.
    ``R`` is the latent dimension fitted to this scenario in experiments.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: Literal["sim1", "sim2"] = "sim1"
    V: int = Field(25, ge=2)
    n: int = Field(250, ge=0)
    R_g: int = Field(2, ge=1)
    R: int = Field(2, ge=1)
    node_sparsity: float = Field(0.5, ge=0, le=1)
    residual_sparsity: float = Field(0.95, ge=0, le=1)
    strategy: Literal[1, 2, 3] = 1
    mu0: float = 2.0
    u_mean: float = 0.5
    u_sd: float = Field(1.0, gt=0)
    community_sizes: Tuple[int, ...] = (8, 9, 8)
    within_mean: float = 0.5
    within_var: float = Field(1.0, gt=0)
    between_fraction: float = Field(0.1, ge=0, le=1)
    seed: int = Field(0, ge=0)

    @field_validator("community_sizes")
    @classmethod
    def _positive_sizes(cls, sizes):
        if any(s < 1 for s in sizes):
            raise ValueError("community sizes must be positive")
        return tuple(sizes)

    @model_validator(mode="after")
    def _check_blocks(self):
        if self.scenario == "sim2" and sum(self.community_sizes) != self.V:
            raise ValueError(
                f"community sizes {self.community_sizes} sum to {sum(self.community_sizes)}, not V={self.V}"
            )
        return self


_SIM_TABLE: Dict[str, Tuple[str, int, int, float, float, int]] = {
    # name: (scenario, R_g, R, node sparsity, residual sparsity, strategy)
    "sim1-case1": ("sim1", 2, 2, 0.5, 0.95, 1),
    "sim1-case2": ("sim1", 3, 5, 0.6, 0.95, 1),
    "sim1-case3": ("sim1", 2, 5, 0.5, 0.90, 2),
    "sim1-case4": ("sim1", 2, 5, 0.4, 0.90, 3),
    "sim2-case1": ("sim2", 2, 2, 0.5, 0.95, 1),
    "sim2-case2": ("sim2", 2, 4, 0.5, 0.95, 1),
    "sim2-case3": ("sim2", 2, 3, 0.7, 0.95, 1),
    "sim2-case4": ("sim2", 2, 5, 0.4, 0.90, 3),
}

SIM_PRESETS = tuple(_SIM_TABLE)


def sim_preset(name: str, **overrides) -> SimConfig:
    """
    Named simulation case with V=25, n=250, mu0=2.

    Raises:
        ValidationError: on an unknown preset name.
    """
    try:
        scenario, R_g, R, node_sp, resid_sp, strategy = _SIM_TABLE[name]
    except KeyError:
        raise ValidationError(f"unknown simulation preset {name!r}; choose from {', '.join(SIM_PRESETS)}")
    fields = dict(
        scenario=scenario, R_g=R_g, R=R, node_sparsity=node_sp,
        residual_sparsity=resid_sp, strategy=strategy,
    )
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig(**fields)


class RunConfig(BaseModel):
    """Everything one CLI invocation needs; echoed into every output manifest."""

    model_config = ConfigDict(extra="forbid")

    prior: PriorSpec = Field(default_factory=PriorSpecLasso)
    mcmc: McmcConfig = Field(default_factory=McmcConfig)
    sim: Optional[SimConfig] = None
    preset: Optional[str] = None
    data: Optional[str] = None
    samples: Optional[str] = None
    networks: Optional[str] = None
    truth: Optional[str] = None
    scores: Optional[str] = None
    out: str = "."
    edge_threshold: float = Field(0.05, gt=0)
    fdr: float = Field(0.05, gt=0, lt=1)
    credible_level: float = Field(0.95, gt=0, lt=1)
    folds: int = Field(0, ge=0, description="k for cross-validation; 0 disables it")
    n_test: int = Field(100, ge=0)
    cases: Tuple[str, ...] = ("sim1-case1",)
    methods: Tuple[PriorKind, ...] = ("bnlc", "bnhc")
    sensitivity: Tuple[str, ...] = Field((), description="hyperparameter presets for a sensitivity table")
    csv: bool = False

    @field_validator("cases")
    @classmethod
    def _known_cases(cls, cases):
        unknown = [c for c in cases if c not in _SIM_TABLE]
        if unknown:
            raise ValueError(f"unknown simulation presets {unknown}")
        return tuple(cases)

    @property
    def seed(self) -> int:
        return self.mcmc.seed


def worker_count(n_tasks: int) -> int:
    """
    Number of parallel workers: ``n_tasks`` capped by the CPU count and by
    the ``NETCLASS_THREADS`` environment variable when it is set.
    """
    limit = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        if cap < 1:
            raise ValidationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
        limit = cap
    return max(1, min(n_tasks, limit))
