import numpy as np
import pytest

from netclass.config import McmcConfig, SimConfig
from netclass.network import NetworkDataset
from netclass.simulation import simulate


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_sim():
    """V=4, n=20 simulated dataset with its truth."""
    return simulate(SimConfig(V=4, n=20, R_g=1, R=2, node_sparsity=0.25, residual_sparsity=0.5, mu0=0.0, seed=7))


@pytest.fixture(scope="session")
def small_data(small_sim) -> NetworkDataset:
    return small_sim.train


@pytest.fixture(scope="session")
def tiny_mcmc() -> McmcConfig:
    return McmcConfig(total=200, burnin=100, thin=2, seed=11)


@pytest.fixture(scope="session")
def empty_data() -> NetworkDataset:
    return NetworkDataset(np.empty((0, 6)), np.empty(0, dtype=np.int8), V=4)
