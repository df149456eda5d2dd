import json
import zipfile

import numpy as np
import pandas as pd
import pytest

from netclass.config import McmcConfig, PriorSpecHorseshoe, RunConfig, SimConfig
from netclass.errors import FormatError
from netclass.formats import (
    NumpyEncoder,
    export_samples_csv,
    load_run_config,
    read_dataset,
    read_edge_matrix,
    read_json,
    read_samples,
    save_run_config,
    write_dataset,
    write_json,
    write_samples,
)
from netclass.network import edge_names
from netclass.posterior import PosteriorSamples


def random_samples(gen, chains=2, draws=7, V=5, R=3) -> PosteriorSamples:
    q = V * (V - 1) // 2
    return PosteriorSamples(
        mu=gen.normal(size=(chains, draws)),
        gamma=gen.normal(size=(chains, draws, q)),
        xi=gen.integers(0, 2, size=(chains, draws, V)),
        lam=gen.integers(0, 2, size=(chains, draws, R)),
        prior_kind="bnhc",
        seed=17,
        config={"prior": PriorSpecHorseshoe().model_dump(mode="json"), "mcmc": McmcConfig().model_dump(mode="json")},
        extras={"delta": gen.uniform(size=(chains, draws)), "sigma2": gen.gamma(1.0, size=(chains, draws))},
    )


def test_numpy_encoder():
    text = json.dumps({"i": np.int64(3), "f": np.float32(0.5), "a": np.arange(2), "b": np.bool_(True),
                       "s": frozenset({"y", "x"})}, cls=NumpyEncoder, sort_keys=True)
    assert json.loads(text) == {"i": 3, "f": 0.5, "a": [0, 1], "b": True, "s": ["x", "y"]}


def test_dataset_round_trip(tmp_path, small_sim):
    write_dataset(tmp_path, small_sim.train, seed=7, config={"note": "x"}, truth=small_sim.truth)
    data, manifest, truth = read_dataset(tmp_path)
    assert np.array_equal(data.edges, small_sim.train.edges)
    assert np.array_equal(data.labels, small_sim.train.labels)
    assert manifest["seed"] == 7 and manifest["format_version"] == 1 and manifest["V"] == 4
    assert np.array_equal(truth.gamma0, small_sim.truth.gamma0)
    header = (tmp_path / "edges.csv").read_text().splitlines()[0]
    assert header == ",".join(edge_names(4))


def test_dataset_unknown_version(tmp_path, small_sim):
    write_dataset(tmp_path, small_sim.train)
    manifest = read_json(tmp_path / "manifest.json")
    manifest["format_version"] = 99
    write_json(tmp_path / "manifest.json", manifest)
    with pytest.raises(FormatError, match="version"):
        read_dataset(tmp_path)


def test_dataset_manifest_without_node_count(tmp_path, small_sim):
    write_dataset(tmp_path, small_sim.train)
    manifest = read_json(tmp_path / "manifest.json")
    del manifest["V"]
    write_json(tmp_path / "manifest.json", manifest)
    with pytest.raises(FormatError, match="'V'"):
        read_dataset(tmp_path)


def test_edge_columns_placed_by_name(tmp_path, gen):
    X = gen.normal(size=(3, 6))
    names = edge_names(4)
    frame = pd.DataFrame(X, columns=names)[names[::-1]]
    frame.to_csv(tmp_path / "edges.csv", index=False)
    back, V = read_edge_matrix(tmp_path / "edges.csv")
    assert V == 4
    assert np.array_equal(back, X)

    frame.iloc[:, :5].to_csv(tmp_path / "short.csv", index=False)
    with pytest.raises(FormatError):
        read_edge_matrix(tmp_path / "short.csv", V=4)
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(FormatError):
        read_edge_matrix(tmp_path / "bad.csv")


def test_samples_round_trip(tmp_path, gen):
    samples = random_samples(gen)
    write_samples(tmp_path / "s.zip", samples, diagnostics={"warnings": ["w"]})
    back, manifest = read_samples(tmp_path / "s.zip")
    for name in ("mu", "gamma", "xi", "lam"):
        assert np.array_equal(getattr(back, name), getattr(samples, name))
    assert set(back.extras) == {"delta", "sigma2"}
    assert np.array_equal(back.extras["sigma2"], samples.extras["sigma2"])
    assert back.prior_kind == "bnhc" and back.seed == 17
    assert back.config == samples.config
    assert manifest["diagnostics"] == {"warnings": ["w"]}
    assert manifest["chains"] == 2 and manifest["draws_per_chain"] == 7


def test_samples_bytes_are_deterministic(tmp_path, gen):
    samples = random_samples(gen)
    write_samples(tmp_path / "a.zip", samples)
    write_samples(tmp_path / "b.zip", samples)
    assert (tmp_path / "a.zip").read_bytes() == (tmp_path / "b.zip").read_bytes()


def test_samples_unknown_version(tmp_path):
    path = tmp_path / "s.zip"
    with zipfile.ZipFile(path, "w") as archive:
        archive.writestr("manifest.json", json.dumps({"format": "netclass-samples", "format_version": 2}))
    with pytest.raises(FormatError, match="version 2"):
        read_samples(path)
    (tmp_path / "junk.zip").write_text("not a zip")
    with pytest.raises(FormatError):
        read_samples(tmp_path / "junk.zip")


@pytest.mark.parametrize("field", ["prior_kind", "seed"])
def test_samples_manifest_missing_field(tmp_path, gen, field):
    write_samples(tmp_path / "s.zip", random_samples(gen))
    with zipfile.ZipFile(tmp_path / "s.zip") as archive:
        members = {name: archive.read(name) for name in archive.namelist()}
    manifest = json.loads(members["manifest.json"])
    del manifest[field]
    members["manifest.json"] = json.dumps(manifest).encode()
    with zipfile.ZipFile(tmp_path / "broken.zip", "w") as archive:
        for name, payload in members.items():
            archive.writestr(name, payload)
    with pytest.raises(FormatError, match=field):
        read_samples(tmp_path / "broken.zip")


def test_csv_export(tmp_path, gen):
    samples = random_samples(gen)
    export_samples_csv(tmp_path, samples)
    gamma = pd.read_csv(tmp_path / "samples_gamma.csv")
    assert gamma.columns.tolist()[:3] == ["chain", "draw", "1_2"]
    assert len(gamma) == samples.n_draws
    xi = pd.read_csv(tmp_path / "samples_xi.csv")
    assert xi.shape == (14, 2 + 5)
    for name in ("mu", "lambda"):
        assert (tmp_path / f"samples_{name}.csv").exists()


def test_run_config_round_trip(tmp_path):
    cfg = RunConfig(
        prior=PriorSpecHorseshoe(R=3, nu=10.0),
        mcmc=McmcConfig(total=100, burnin=50, thin=5, frozen=frozenset({"Q", "mu"})),
        sim=SimConfig(V=6, n=12),
        cases=("sim2-case1",),
        sensitivity=("default",),
    )
    save_run_config(tmp_path / "run.json", cfg)
    assert load_run_config(tmp_path / "run.json") == cfg
    assert json.loads((tmp_path / "run.json").read_text())["mcmc"]["frozen"] == ["mu", "Q"]
    with pytest.raises(FormatError):
        load_run_config(tmp_path / "missing.json")
