import numpy as np
import pytest

from netclass.config import McmcConfig, PriorSpecHorseshoe, PriorSpecLasso
from netclass.diagnostics import effective_sample_size
from netclass.distributions import GigParams, RngStream, gig_mean
from netclass.errors import SamplerError, ValidationError
from netclass.gibbs import common
from netclass.gibbs.common import update_gamma, update_mu, update_node_sparsity
from netclass.gibbs.lasso import LassoSampler, log_posterior, sample_prior, update_local_scales
from netclass.gibbs.runner import run_chain_bnlc, run_chains
from netclass.gibbs.state import ChainStateLasso
from netclass.network import edge_layout


def make_state(V=4, R=2, n=20, seed=0) -> ChainStateLasso:
    gen = np.random.default_rng(seed)
    q = V * (V - 1) // 2
    return ChainStateLasso(
        mu=0.2,
        gamma=0.3 * gen.normal(size=q),
        u=gen.normal(size=(V, R)),
        xi=np.ones(V, dtype=np.int8),
        lam=np.ones(R, dtype=np.int8),
        pi_r=np.full(R, 0.5),
        s2=gen.uniform(0.3, 1.0, size=q),
        delta=0.5,
        Q=np.eye(R),
        omega=gen.uniform(0.1, 0.4, size=n),
        theta2=1.0,
    )


def test_update_mu_conditional(small_data):
    state = make_state(n=small_data.n)
    kappa = small_data.labels - 0.5
    precision = state.omega.sum()
    mean = np.sum(kappa - state.omega * (small_data.edges @ state.gamma)) / precision
    rng = RngStream(1)
    draws = np.array([update_mu(state, small_data, rng) for _ in range(20_000)])
    assert abs(draws.mean() - mean) < 3 * np.sqrt(1.0 / precision / draws.size)
    assert draws.var() == pytest.approx(1.0 / precision, rel=0.05)


def test_update_mu_skips_empty_data(empty_data):
    state = make_state(n=0)
    assert update_mu(state, empty_data, RngStream(0)) == 0.2


def test_update_gamma_without_subjects_draws_prior(empty_data):
    state = make_state(n=0)
    W = state.low_rank_mean(edge_layout(4))
    rng = RngStream(2)
    draws = np.array([update_gamma(state, empty_data, rng).copy() for _ in range(20_000)])
    se = np.sqrt(state.s2 / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - W) < 4 * se)
    assert np.allclose(draws.var(axis=0), state.s2, rtol=0.06)


@pytest.mark.parametrize("dense_limit", [1024, 0])
def test_update_gamma_posterior_mean(small_data, monkeypatch, dense_limit):
    monkeypatch.setattr(common, "DENSE_GAMMA_LIMIT", dense_limit)
    data = small_data.subset([0, 1, 2])
    state = make_state(n=data.n, seed=3)
    X, D = data.edges, state.s2
    W = state.low_rank_mean(edge_layout(4))
    precision = X.T @ (state.omega[:, None] * X) + np.diag(1.0 / D)
    linear = X.T @ (data.labels - 0.5 - state.omega * state.mu) + W / D
    cov = np.linalg.inv(precision)
    mean = cov @ linear

    rng = RngStream(4)
    draws = np.array([update_gamma(state, data, rng).copy() for _ in range(20_000)])
    se = np.sqrt(np.diag(cov) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * se)
    assert np.allclose(draws.var(axis=0), np.diag(cov), rtol=0.08)


def test_update_local_scales_keeps_positive():
    state = make_state(n=0)
    s2, theta2 = update_local_scales(state, PriorSpecLasso(), RngStream(5))
    assert s2.shape == (6,)
    assert np.all(s2 > 0) and theta2 > 0


def test_update_node_sparsity_conditional():
    state = make_state()
    state.xi[:] = [1, 1, 1, 0]
    rng = RngStream(6)
    draws = np.array([update_node_sparsity(state, PriorSpecLasso(), rng) for _ in range(20_000)])
    # Beta(1 + 3, 1 + 1)
    mean, var = 4 / 6, (4 * 2) / (6 ** 2 * 7)
    assert abs(draws.mean() - mean) < 3 * np.sqrt(var / draws.size)


def test_prior_draws():
    prior = PriorSpecLasso()
    rng = RngStream(7)
    states = [sample_prior(5, prior, rng, mu=0.4) for _ in range(4000)]
    for state in states[:50]:
        state.check()
        assert state.mu == 0.4
    delta = np.array([s.delta for s in states])
    assert abs(delta.mean() - 0.5) < 3 * np.sqrt(1 / 12 / delta.size)
    theta2 = np.array([s.theta2 for s in states])
    assert abs(theta2.mean() - 1.0) < 3 * np.sqrt(1.0 / theta2.size)


def test_sweeps_preserve_invariants(small_data):
    sampler = LassoSampler(small_data, PriorSpecLasso(R=2), McmcConfig(total=30, burnin=0, thin=1, seed=3))
    state = sampler.initial_state()
    for _ in range(30):
        sampler.sweep(state)
        state.check()
        assert np.all((state.u != 0).any(axis=1) == (state.xi == 1))
        assert np.isfinite(log_posterior(state, small_data, sampler.prior))


def test_run_shapes_and_extras(small_data, tiny_mcmc):
    samples = run_chain_bnlc(small_data, PriorSpecLasso(R=3), tiny_mcmc)
    assert samples.mu.shape == (1, 50)
    assert samples.gamma.shape == (1, 50, 6)
    assert samples.xi.shape == (1, 50, 4)
    assert samples.lam.shape == (1, 50, 3)
    assert set(samples.extras) == {"delta", "theta2", "log_posterior"}
    assert np.all(np.isfinite(samples.extras["log_posterior"]))
    assert samples.config["prior"]["nu"] == 20.0


def test_chains_deterministic_and_worker_independent(small_data):
    cfg = McmcConfig(total=60, burnin=30, thin=3, chains=2, seed=21)
    prior = PriorSpecLasso(R=2)
    serial = run_chains(small_data, prior, cfg, n_jobs=1)
    again = run_chains(small_data, prior, cfg, n_jobs=1)
    parallel = run_chains(small_data, prior, cfg, n_jobs=2)
    for name in ("mu", "gamma", "xi", "lam"):
        assert np.array_equal(getattr(serial, name), getattr(again, name))
        assert np.array_equal(getattr(serial, name), getattr(parallel, name))
    assert not np.array_equal(serial.gamma[0], serial.gamma[1])


def test_frozen_intercept(small_data):
    cfg = McmcConfig(total=40, burnin=10, thin=1, seed=2, frozen=frozenset({"mu"}))
    samples = run_chains(small_data, PriorSpecLasso(R=2), cfg)
    assert np.unique(samples.mu).size == 1


def test_sampler_error_carries_location(small_data, monkeypatch):
    def failing_update(state, prior, rng):
        raise SamplerError("Q is broken")

    monkeypatch.setattr(common, "update_Q", failing_update)
    sampler = LassoSampler(small_data, PriorSpecLasso(), McmcConfig(total=5, burnin=0, thin=1))
    with pytest.raises(SamplerError, match=r"chain 0, iteration 1") as info:
        sampler.run()
    assert info.value.iteration == 1
    assert info.value.chain == 0


def test_rejects_wrong_inputs(small_data, empty_data):
    with pytest.raises(ValidationError):
        LassoSampler(small_data, PriorSpecHorseshoe())
    with pytest.raises(ValidationError, match="empty"):
        run_chain_bnlc(empty_data)


def test_prior_recovery_without_subjects(empty_data):
    cfg = McmcConfig(total=4000, burnin=500, thin=1, seed=8)
    samples = run_chains(empty_data, PriorSpecLasso(R=2), cfg)
    delta = samples.extras["delta"][0]
    se = delta.std(ddof=1) / np.sqrt(effective_sample_size(delta))
    assert abs(delta.mean() - 0.5) < 3 * se
    assert delta.var() == pytest.approx(1 / 12, rel=0.2)


def test_update_local_scales_conditionals():
    base = make_state(V=5, n=0, seed=9)
    base.theta2 = 1.7
    prior = PriorSpecLasso()
    resid = base.gamma - base.low_rank_mean(edge_layout(5))
    q = resid.shape[0]
    rng = RngStream(12)
    s2 = np.empty((20_000, q))
    gap = np.empty(20_000)
    gap_var = np.empty(20_000)
    for i in range(s2.shape[0]):
        state = base.copy()
        s2[i], theta2 = update_local_scales(state, prior, rng)
        # theta^2 | s^2 ~ Gamma(zeta + q, iota + sum(s^2) / 2)
        rate = prior.iota + 0.5 * s2[i].sum()
        gap[i] = theta2 - (prior.zeta + q) / rate
        gap_var[i] = (prior.zeta + q) / rate ** 2
    expected = gig_mean(GigParams(0.5, resid ** 2, 1.7))
    assert np.all(np.abs(s2.mean(axis=0) - expected) < 4 * np.sqrt(s2.var(axis=0) / s2.shape[0]))
    assert abs(gap.mean()) < 4 * np.sqrt(gap_var.mean() / gap.size)


def test_summaries_include_global_scale():
    summary = make_state().scalar_summaries()
    assert set(summary) == {"mu", "delta", "n_active", "rank", "theta2"}
    assert summary["n_active"] == 4.0


def test_broken_state_caught_during_burnin(small_data, monkeypatch):
    original = common.update_Q
    calls = []

    def corrupting_update(state, prior, rng):
        calls.append(1)
        out = original(state, prior, rng)
        if len(calls) == 3:
            state.xi[0] = 1
            state.u[0] = 0.0
        return out

    monkeypatch.setattr(common, "update_Q", corrupting_update)
    sampler = LassoSampler(small_data, PriorSpecLasso(R=2), McmcConfig(total=10, burnin=8, thin=1, seed=5))
    with pytest.raises(SamplerError, match="node 1") as info:
        sampler.run()
    assert info.value.iteration == 3
