import numpy as np
import pandas as pd
import pytest

from netclass import evaluation
from netclass.config import McmcConfig, PriorSpecLasso
from netclass.errors import FormatError, ValidationError
from netclass.evaluation import (
    coefficient_mse,
    evaluate_fit,
    experiment_table,
    false_discovery_proportion,
    fold_assignment,
    kfold_cv,
    load_external_scores,
    node_separation_auc,
    roc_auc,
    selection_rates,
    sensitivity_presets,
    sensitivity_table,
)
from netclass.gibbs.runner import run_chains
from netclass.posterior import infer

FAST = McmcConfig(total=40, burnin=20, thin=2, seed=5)


def brute_force_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return wins / (pos.size * neg.size)


def test_roc_auc_matches_pairwise_count(gen):
    for _ in range(50):
        m = int(gen.integers(2, 201))
        labels = gen.integers(0, 2, size=m)
        labels[0], labels[1] = 0, 1
        scores = np.round(gen.normal(size=m), 1)
        auc, roc = roc_auc(scores, labels)
        assert auc == pytest.approx(brute_force_auc(scores, labels), abs=1e-12)
        assert roc[0].tolist() == [0.0, 0.0]
        assert roc[-1].tolist() == [1.0, 1.0]


def test_roc_auc_needs_both_classes():
    with pytest.raises(ValidationError):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValidationError):
        roc_auc([0.1, 0.2, 0.3], [1, 0])


def test_selection_rates():
    assert selection_rates([0, 1, 5], [0, 1, 2, 3], 10) == (0.5, pytest.approx(1 / 6))
    assert selection_rates([2], [], 5) == (1.0, 0.2)
    assert selection_rates([], [0, 1], 2) == (0.0, 0.0)
    with pytest.raises(ValidationError):
        selection_rates([12], [0], 10)


def test_false_discovery_proportion():
    assert false_discovery_proportion([], [1]) == 0.0
    assert false_discovery_proportion([1, 2, 3, 4], [1, 2]) == 0.5


def test_coefficient_mse():
    assert coefficient_mse([1.0, 2.0], [1.0, 0.0]) == 2.0
    with pytest.raises(ValidationError):
        coefficient_mse([1.0], [1.0, 2.0])


def test_node_separation_auc():
    assert node_separation_auc(np.array([0.9, 0.8, 0.1, 0.2]), [0, 1]) == 1.0
    assert np.isnan(node_separation_auc(np.array([0.9, 0.8]), [0, 1]))


def test_fold_assignment_stratified():
    labels = np.array([0] * 10 + [1] * 20)
    folds = fold_assignment(labels, 5, seed=1)
    for f in range(5):
        assert np.bincount(labels[folds == f], minlength=2).tolist() == [2, 4]
    assert np.array_equal(folds, fold_assignment(labels, 5, seed=1))


def test_fold_assignment_leave_one_out_and_errors():
    labels = np.array([0, 1, 0, 1])
    assert sorted(fold_assignment(labels, 4, seed=0).tolist()) == [0, 1, 2, 3]
    with pytest.raises(ValidationError):
        fold_assignment(labels, 5, seed=0)
    with pytest.raises(ValidationError):
        fold_assignment(labels, 1, seed=0)


def test_kfold_cv_scores_every_subject(small_data):
    cv = kfold_cv(small_data, PriorSpecLasso(R=2), FAST, k=2, n_jobs=1)
    assert np.all(np.isfinite(cv.scores))
    assert np.all((cv.scores > 0) & (cv.scores < 1))
    assert 0.0 <= cv.auc <= 1.0
    assert cv.skipped == []


def test_kfold_cv_skips_single_class_folds(small_data):
    data = small_data.with_labels([0] + [1] * (small_data.n - 1))
    cv = kfold_cv(data, PriorSpecLasso(R=2), FAST, k=2, n_jobs=1)
    assert len(cv.skipped) == 1
    assert np.isnan(cv.scores[0])
    assert np.isnan(cv.auc)
    assert any("skipped" in w for w in cv.warnings)


def test_evaluate_fit_against_truth(small_sim):
    samples = run_chains(small_sim.train, PriorSpecLasso(R=2), FAST)
    report = infer(samples)
    metrics = evaluate_fit(samples, report, small_sim.truth, small_sim.train, runtime=1.5)
    row = metrics.to_row()
    assert {"mse", "node_tpr", "node_fpr", "edge_tpr", "edge_fpr", "auc", "runtime"} <= set(row)
    assert "roc" not in row
    assert row["mse"] >= 0 and 0 <= row["auc"] <= 1
    assert row["runtime"] == 1.5
    blind = evaluate_fit(samples, report, None, None)
    assert np.isnan(blind.mse) and np.isnan(blind.auc)


def test_experiment_table_rows():
    cfg = McmcConfig(total=20, burnin=10, thin=1, seed=3)
    result = experiment_table(["sim1-case1"], ["bnlc", "bnhc"], cfg, n_test=60, n_jobs=1)
    assert result.table["method"].tolist() == ["bnlc", "bnhc"]
    assert (result.table["error"] == "").all()
    assert result.table["auc"].between(0, 1).all()
    assert set(result.roc.columns) == {"case", "method", "fpr", "tpr"}
    assert len(result.roc) > 0
    overlap = result.overlap
    assert overlap["case"].tolist() == ["sim1-case1"]
    assert overlap[["frac_of_bnlc", "frac_of_bnhc"]].stack().between(0, 1).all()
    assert (overlap["top_10"] <= 10).all() and (overlap["top_30"] <= 30).all()


def test_experiment_grid_isolates_failing_cells(monkeypatch):
    cfg = McmcConfig(total=20, burnin=10, thin=1, seed=3)
    # nu = 3 is valid for R = 2 (case 1) but not for R = 5 (case 2)
    result = experiment_table(["sim1-case1", "sim1-case2"], ["bnlc"], cfg, n_test=20,
                              prior_overrides={"nu": 3.0}, n_jobs=1)
    assert result.table["error"].iloc[0] == ""
    assert "nu must exceed" in result.table["error"].iloc[1]
    assert set(result.roc["case"]) == {"sim1-case1"}

    real_run_chains = evaluation.run_chains

    def singular_horseshoe(data, prior, cfg, n_jobs=None):
        if prior.kind == "bnhc":
            raise np.linalg.LinAlgError("singular matrix")
        return real_run_chains(data, prior, cfg, n_jobs=n_jobs)

    monkeypatch.setattr(evaluation, "run_chains", singular_horseshoe)
    result = experiment_table(["sim1-case1"], ["bnlc", "bnhc"], cfg, n_test=20, n_jobs=1)
    assert result.table["error"].tolist()[0] == ""
    assert result.table["error"].tolist()[1] == "LinAlgError: singular matrix"
    assert result.overlap.empty


def test_sensitivity_presets():
    assert set(sensitivity_presets("bnlc")) == {"default", "sparse-nodes", "rank-4", "rank-8", "rank-10"}
    hs = sensitivity_presets("bnhc")
    assert hs["nu-10"].nu == 10 and hs["sparse-nodes"].b_delta == 9
    assert hs["rank-8"].R == 8


def test_sensitivity_table(small_sim):
    table = sensitivity_table(small_sim.train, small_sim.truth, "bnlc", ["default", "rank-4"], FAST)
    assert table["preset"].tolist() == ["default", "rank-4"]
    with pytest.raises(ValidationError):
        sensitivity_table(small_sim.train, small_sim.truth, "bnlc", ["nu-10"], FAST)


def test_load_external_scores(tmp_path):
    path = tmp_path / "scores.csv"
    pd.DataFrame({"subject": [1, 2, 3], "score": [0.2, 0.9, 0.4], "label": [0, 1, 1]}).to_csv(path, index=False)
    scores, labels = load_external_scores(path)
    assert scores.tolist() == [0.2, 0.9, 0.4]
    assert roc_auc(scores, labels)[0] == 1.0

    pd.DataFrame({"subject": [1], "score": [0.2]}).to_csv(path, index=False)
    with pytest.raises(FormatError, match="label"):
        load_external_scores(path)
    with pytest.raises(FormatError):
        load_external_scores(tmp_path / "missing.csv")
