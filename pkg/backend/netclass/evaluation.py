"""
Evaluation harness: coefficient error, selection rates, ROC/AUC,
cross-validation and the simulation experiment grid.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import pydantic
from joblib import Parallel, delayed
from sklearn.metrics import roc_auc_score, roc_curve
from sklearn.model_selection import LeaveOneOut, StratifiedKFold

from .config import McmcConfig, make_prior, sim_preset, worker_count
from .errors import FormatError, NetclassError, ValidationError
from .gibbs.runner import run_chains
from .network import NetworkDataset
from .posterior import (
    DEFAULT_EDGE_THRESHOLD,
    DEFAULT_FDR,
    InferenceReport,
    PosteriorSamples,
    compare_edge_selections,
    infer,
    predict_proba,
)
from .simulation import GroundTruth, simulate

logger = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    """One row of an experiment table."""

    mse: float
    node_tpr: float
    node_fpr: float
    edge_tpr: float
    edge_fpr: float
    auc: float
    roc: List[Tuple[float, float]] = field(default_factory=list)
    runtime: float = 0.0
    edge_fdr: float = 0.0
    node_auc: float = float("nan")
    reff_mode: int = -1
    reff_mean: float = float("nan")
    n_selected_edges: int = 0
    n_selected_nodes: int = 0

    def to_row(self) -> dict:
        row = asdict(self)
        row.pop("roc")
        return row


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def coefficient_mse(gamma_hat: np.ndarray, gamma_true: np.ndarray) -> float:
    """Mean squared difference over all q edge coefficients."""
    a = np.asarray(gamma_hat, dtype=float)
    b = np.asarray(gamma_true, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"coefficient vectors differ in length: {a.shape[0]} vs {b.shape[0]}")
    if a.size == 0:
        return 0.0
    return float(np.mean((a - b) ** 2))


def selection_rates(selected: Iterable[int], truth: Iterable[int], universe_size: int) -> Tuple[float, float]:
    """
    True and false positive rates of a selected index set.

    TPR is 1 when the truth set is empty; FPR is 0 when the truth covers the
    universe.
    """
    selected = set(int(i) for i in selected)
    truth = set(int(i) for i in truth)
    if any(i < 0 or i >= universe_size for i in selected | truth):
        raise ValidationError(f"indices must lie in [0, {universe_size})")
    tpr = len(selected & truth) / len(truth) if truth else 1.0
    negatives = universe_size - len(truth)
    fpr = len(selected - truth) / negatives if negatives else 0.0
    return tpr, fpr


def false_discovery_proportion(selected: Iterable[int], truth: Iterable[int]) -> float:
    selected = set(int(i) for i in selected)
    if not selected:
        return 0.0
    return len(selected - set(int(i) for i in truth)) / len(selected)


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> Tuple[float, np.ndarray]:
    """
    AUC (ties count half) and the ROC curve over every score threshold.

    Returns:
        (auc, roc) with ``roc`` an m x 2 array of (fpr, tpr) from (0, 0) to (1, 1).

    Raises:
        ValidationError: unless both classes are present.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape:
        raise ValidationError(f"{scores.shape[0]} scores for {labels.shape[0]} labels")
    if np.unique(labels).size < 2:
        raise ValidationError("ROC analysis needs both positive and negative labels")
    auc = float(roc_auc_score(labels, scores))
    fpr, tpr, _ = roc_curve(labels, scores, drop_intermediate=False)
    return auc, np.column_stack([fpr, tpr])


def node_separation_auc(node_probs: np.ndarray, active_nodes: Iterable[int]) -> float:
    """AUC of node inclusion probabilities for truly active vs inactive nodes."""
    truth = np.zeros(np.asarray(node_probs).shape[0], dtype=int)
    truth[list(active_nodes)] = 1
    if truth.min() == truth.max():
        return float("nan")
    return roc_auc(node_probs, truth)[0]


def evaluate_fit(samples: PosteriorSamples, report: InferenceReport, truth: Optional[GroundTruth],
                 scored: NetworkDataset, runtime: float = 0.0) -> MetricsReport:
    """
    Metrics of one fit: coefficient MSE and node/edge selection rates against
    ``truth`` (NaN without one), and AUC of the classifier on ``scored``.
    """
    if truth is not None:
        mse = coefficient_mse(report.gamma_mean, truth.gamma0)
        node_tpr, node_fpr = selection_rates(report.selected_nodes, truth.active_nodes, samples.V)
        edge_tpr, edge_fpr = selection_rates(report.selected_edges, truth.active_edges, samples.q)
        edge_fdr = false_discovery_proportion(report.selected_edges, truth.active_edges)
        node_auc = node_separation_auc(report.node_probs, truth.active_nodes)
    else:
        mse = node_tpr = node_fpr = edge_tpr = edge_fpr = edge_fdr = node_auc = float("nan")

    auc, roc = float("nan"), np.empty((0, 2))
    if scored is not None and scored.n and np.unique(scored.labels).size == 2:
        auc, roc = roc_auc(predict_proba(samples, scored.edges), scored.labels)

    return MetricsReport(
        mse=mse, node_tpr=node_tpr, node_fpr=node_fpr, edge_tpr=edge_tpr, edge_fpr=edge_fpr,
        auc=auc, roc=[tuple(map(float, p)) for p in roc], runtime=runtime, edge_fdr=edge_fdr,
        node_auc=node_auc, reff_mode=report.reff.mode, reff_mean=report.reff.mean,
        n_selected_edges=int(report.selected_edges.size), n_selected_nodes=int(report.selected_nodes.size),
    )


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

@dataclass
class CvResult:
    scores: np.ndarray
    labels: np.ndarray
    folds: np.ndarray
    auc: float
    roc: np.ndarray
    skipped: List[int] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def fold_assignment(labels: np.ndarray, k: int, seed: int) -> np.ndarray:
    """
    Fold index of every subject: stratified and shuffled with ``seed``, or
    leave-one-out when k equals the number of subjects.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if k < 2:
        raise ValidationError(f"cross-validation needs k >= 2, got {k}")
    if k > n:
        raise ValidationError(f"k={k} exceeds the {n} subjects")
    folds = np.empty(n, dtype=int)
    if k == n:
        splitter = LeaveOneOut().split(np.zeros(n))
    else:
        counts = np.bincount(labels.astype(int), minlength=2)
        if counts.max() < k:
            raise ValidationError(f"k={k} folds exceed the size of every class {counts.tolist()}")
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed).split(np.zeros(n), labels)
    for f, (_, test) in enumerate(splitter):
        folds[test] = f
    return folds


def _fit_fold(data: NetworkDataset, prior, cfg: McmcConfig, folds: np.ndarray, f: int):
    train = data.subset(np.flatnonzero(folds != f))
    test_idx = np.flatnonzero(folds == f)
    if np.unique(train.labels).size < 2:
        return f, test_idx, None
    samples = run_chains(train, prior, cfg, n_jobs=1)
    return f, test_idx, predict_proba(samples, data.edges[test_idx])


def kfold_cv(data: NetworkDataset, prior, cfg: McmcConfig, k: int = 10,
             n_jobs: Optional[int] = None) -> CvResult:
    """
    k-fold cross-validated class probabilities and their pooled AUC.

    One chain per fold. Folds whose training part holds a single class are
    skipped, logged and listed in ``skipped``; their subjects score NaN and
    do not enter the AUC.
    """
    folds = fold_assignment(data.labels, k, cfg.seed)
    fold_cfg = cfg.model_copy(update={"chains": 1})
    n_jobs = n_jobs or worker_count(k)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_fit_fold)(data, prior, fold_cfg, folds, f) for f in range(int(folds.max()) + 1)
    )
    scores = np.full(data.n, np.nan)
    skipped, warnings = [], []
    for f, test_idx, probs in sorted(results, key=lambda r: r[0]):
        if probs is None:
            message = f"fold {f + 1}: training labels hold a single class; fold skipped"
            logger.warning(message)
            skipped.append(f)
            warnings.append(message)
            continue
        scores[test_idx] = probs
    kept = ~np.isnan(scores)
    if np.unique(data.labels[kept]).size == 2:
        auc, roc = roc_auc(scores[kept], data.labels[kept])
    else:
        auc, roc = float("nan"), np.empty((0, 2))
        message = "scored subjects hold a single class; AUC undefined"
        logger.warning(message)
        warnings.append(message)
    logger.info("%d-fold CV AUC %.3f (%d folds skipped)", k, auc, len(skipped))
    return CvResult(scores, np.asarray(data.labels), folds, auc, roc, skipped, warnings)


# ---------------------------------------------------------------------------
# Experiment grid
# ---------------------------------------------------------------------------

@dataclass
class ExperimentResult:
    table: pd.DataFrame
    roc: pd.DataFrame
    overlap: pd.DataFrame = field(default_factory=pd.DataFrame)


OVERLAP_TOPS = (10, 20, 30)


Selection = Tuple[np.ndarray, np.ndarray]


def _run_cell(case: str, method: str, cfg: McmcConfig, n_test: int, edge_threshold: float,
              fdr: float, prior_overrides: Dict) -> Tuple[dict, np.ndarray, Optional[Selection]]:
    row = {"case": case, "method": method, "error": ""}
    try:
        sim_cfg = sim_preset(case, seed=cfg.seed)
        sim = simulate(sim_cfg, n_test=n_test)
        prior = make_prior(method, **{"R": sim_cfg.R, **prior_overrides})
        start = time.perf_counter()
        samples = run_chains(sim.train, prior, cfg, n_jobs=1)
        runtime = time.perf_counter() - start
        report = infer(samples, edge_threshold, fdr)
        metrics = evaluate_fit(samples, report, sim.truth, sim.test or sim.train, runtime)
        row.update(metrics.to_row())
        return row, np.asarray(metrics.roc).reshape(-1, 2), (report.selected_edges, report.gamma_mean)
    except (NetclassError, pydantic.ValidationError) as exc:
        logger.warning("cell %s/%s failed: %s", case, method, exc)
        row["error"] = str(exc)
    except Exception as exc:
        logger.exception("cell %s/%s failed", case, method)
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row, np.empty((0, 2)), None


def _overlap_rows(cases: Sequence[str], selections: Dict[Tuple[str, str], Selection]) -> pd.DataFrame:
    rows = []
    for case in cases:
        lasso, horseshoe = selections.get((case, "bnlc")), selections.get((case, "bnhc"))
        if lasso is None or horseshoe is None:
            continue
        overlap = compare_edge_selections(lasso[0], horseshoe[0], lasso[1], horseshoe[1], OVERLAP_TOPS)
        row = {"case": case, "n_both": overlap["n_both"], "frac_of_bnlc": overlap["frac_of_a"],
               "frac_of_bnhc": overlap["frac_of_b"]}
        row.update({f"top_{k}": v for k, v in overlap["top_overlap"].items()})
        rows.append(row)
    columns = ["case", "n_both", "frac_of_bnlc", "frac_of_bnhc"] + [f"top_{k}" for k in OVERLAP_TOPS]
    return pd.DataFrame(rows, columns=columns)


def experiment_table(cases: Sequence[str], methods: Sequence[str], cfg: McmcConfig,
                     n_test: int = 100, edge_threshold: float = DEFAULT_EDGE_THRESHOLD,
                     fdr: float = DEFAULT_FDR, prior_overrides: Optional[Dict] = None,
                     n_jobs: Optional[int] = None) -> ExperimentResult:
    """
    Simulate, fit, infer and evaluate every (case, method) cell.

    AUC is measured on an independent test set of ``n_test`` subjects from
    the same scenario (in-sample when n_test is 0). A failing cell keeps its
    row with the error message and the grid continues. When both priors ran
    on a case, ``overlap`` compares their selected edges.
    """
    cells = [(case, method) for case in cases for method in methods]
    n_jobs = n_jobs or worker_count(len(cells))
    results = Parallel(n_jobs=n_jobs)(
        delayed(_run_cell)(case, method, cfg, n_test, edge_threshold, fdr, prior_overrides or {})
        for case, method in cells
    )
    rows, curves, selections = [], [], {}
    for (case, method), (row, roc, selection) in zip(cells, results):
        rows.append(row)
        if selection is not None:
            selections[case, method] = selection
        for fpr, tpr in roc:
            curves.append({"case": case, "method": method, "fpr": fpr, "tpr": tpr})
    table = pd.DataFrame(rows)
    roc = pd.DataFrame(curves, columns=["case", "method", "fpr", "tpr"])
    return ExperimentResult(table, roc, _overlap_rows(cases, selections))


# ---------------------------------------------------------------------------
# Hyperparameter sensitivity
# ---------------------------------------------------------------------------

def sensitivity_presets(prior_kind: str) -> Dict[str, object]:
    """
    Named hyperparameter settings for sensitivity runs.

    ``default`` and ``sparse-nodes`` (a_delta=1, b_delta=9) for both priors,
    ``nu-10`` and ``nu-50`` for the horseshoe, and ``rank-4``, ``rank-8``,
    ``rank-10`` overriding R.
    """
    presets = {
        "default": make_prior(prior_kind),
        "sparse-nodes": make_prior(prior_kind, a_delta=1.0, b_delta=9.0),
    }
    if prior_kind == "bnhc":
        presets["nu-10"] = make_prior(prior_kind, nu=10.0)
        presets["nu-50"] = make_prior(prior_kind, nu=50.0)
    for R in (4, 8, 10):
        presets[f"rank-{R}"] = make_prior(prior_kind, R=R)
    return presets


def sensitivity_table(dataset: NetworkDataset, truth: Optional[GroundTruth], prior_kind: str,
                      presets: Optional[Sequence[str]], cfg: McmcConfig,
                      edge_threshold: float = DEFAULT_EDGE_THRESHOLD, fdr: float = DEFAULT_FDR) -> pd.DataFrame:
    """One in-sample MetricsReport row per named preset."""
    available = sensitivity_presets(prior_kind)
    names = list(presets) if presets else list(available)
    unknown = [p for p in names if p not in available]
    if unknown:
        raise ValidationError(f"unknown sensitivity presets {unknown}; choose from {sorted(available)}")
    rows = []
    for name in names:
        start = time.perf_counter()
        samples = run_chains(dataset, available[name], cfg)
        report = infer(samples, edge_threshold, fdr)
        metrics = evaluate_fit(samples, report, truth, dataset, time.perf_counter() - start)
        rows.append({"preset": name, **metrics.to_row()})
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# External scores
# ---------------------------------------------------------------------------

SCORE_COLUMNS = ("subject", "score", "label")


def load_external_scores(path) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read class scores produced elsewhere: CSV with columns subject,score,label.

    Raises:
        FormatError: on missing columns or non-binary labels.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise FormatError(f"cannot read score file {path}: {exc}") from exc
    missing = [c for c in SCORE_COLUMNS if c not in frame.columns]
    if missing:
        raise FormatError(f"score file {path} lacks columns {missing}")
    labels = frame["label"].to_numpy()
    if not np.all(np.isin(labels, (0, 1))):
        raise FormatError(f"score file {path}: labels must be 0 or 1")
    return frame["score"].to_numpy(dtype=float), labels.astype(int)
