"""
Command-line front end.

    netclass simulate --preset sim1-case1 --seed 1 --out data/
    netclass fit --data data/ --prior bnlc --iters 50000 --burnin 30000 --out fit/
    netclass infer --samples fit/samples.zip --out fit/
    netclass classify --samples fit/samples.zip --networks new_edges.csv --out fit/
    netclass evaluate --samples fit/samples.zip --data data/test --truth data/truth.json
    netclass experiment --cases sim1-case1 sim2-case1 --out results/

Every subcommand resolves one RunConfig (``--config`` file, then explicit
flags), writes it next to its outputs and is a pure function of that config
and its input files. Validation and format errors exit with 2, anything else
that fails exits with 3.
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import networkx as nx
import numpy as np
import pandas as pd
import pydantic

from .config import SIM_PRESETS, RunConfig, make_prior, sim_preset
from .diagnostics import diagnostics
from .errors import DiagnosticsError, FormatError, NetclassError, ValidationError
from .evaluation import (
    evaluate_fit,
    experiment_table,
    kfold_cv,
    load_external_scores,
    roc_auc,
    sensitivity_table,
)
from .formats import (
    FORMAT_VERSION,
    export_samples_csv,
    load_run_config,
    read_dataset,
    read_edge_matrix,
    read_samples,
    read_truth,
    save_run_config,
    write_dataset,
    write_json,
    write_samples,
)
from .gibbs.runner import run_chains
from .network import NetworkDataset, edge_index
from .posterior import PosteriorSamples, infer, influential_subnetwork, predict_proba
from .simulation import simulate

logger = logging.getLogger("netclass")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FAILED = 3

CONFIG_FILE = "run_config.json"
SAMPLES_FILE = "samples.zip"


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False


# ---------------------------------------------------------------------------
# Configuration resolution
# ---------------------------------------------------------------------------

def _mcmc_overrides(args: argparse.Namespace) -> dict:
    fields = {
        "total": args.iters,
        "burnin": args.burnin,
        "thin": args.thin,
        "chains": args.chains,
        "seed": args.seed,
    }
    updates = {k: v for k, v in fields.items() if v is not None}
    if args.progress:
        updates["progress"] = True
    return updates


def _prior_overrides(args: argparse.Namespace) -> dict:
    fields = {"R": args.r, "nu": args.nu, "a_delta": args.a_delta, "b_delta": args.b_delta}
    return {k: v for k, v in fields.items() if v is not None}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Effective RunConfig of one invocation: the ``--config`` file (or the
    defaults) with every explicitly given flag applied on top.
    """
    base = load_run_config(args.config) if args.config else RunConfig()
    payload = base.model_dump(mode="json")

    payload["mcmc"].update(_mcmc_overrides(args))

    prior = dict(payload["prior"])
    kind = prior.pop("kind")
    if args.prior is not None:
        # switching kind keeps the shared hyperparameters only
        kind = args.prior
    prior.update(_prior_overrides(args))
    payload["prior"] = make_prior(kind, **prior).model_dump(mode="json")

    if payload.get("sim") is not None and args.seed is not None:
        payload["sim"]["seed"] = args.seed

    fields = {
        "preset": args.preset,
        "data": args.data,
        "samples": args.samples,
        "networks": args.networks,
        "truth": args.truth,
        "scores": args.scores,
        "out": args.out,
        "edge_threshold": args.edge_threshold,
        "fdr": args.fdr,
        "credible_level": args.credible_level,
        "folds": args.folds,
        "n_test": args.n_test,
        "cases": args.cases,
        "methods": args.methods,
        "sensitivity": args.sensitivity,
    }
    payload.update({k: v for k, v in fields.items() if v is not None})
    if args.csv:
        payload["csv"] = True
    return RunConfig.model_validate(payload)


def _require(value: Optional[str], flag: str, command: str) -> str:
    if not value:
        raise ValidationError(f"{command} needs {flag}")
    return value


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _run_manifest(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "format_version": FORMAT_VERSION,
        "seed": cfg.seed,
        "config": cfg.model_dump(mode="json", exclude={"out"}),
    }


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> Path:
    """
    Write a simulated training set with its truth sidecar to ``out`` and,
    when ``n_test`` is positive, an independent test set to ``out/test``.
    """
    if cfg.sim is not None:
        sim_cfg = cfg.sim
    elif cfg.preset is not None:
        sim_cfg = sim_preset(cfg.preset, seed=cfg.seed)
    else:
        raise ValidationError(f"simulate needs --preset (one of {', '.join(SIM_PRESETS)}) or a sim section in --config")
    out = _output_dir(cfg)
    sim = simulate(sim_cfg, n_test=cfg.n_test)
    echo = cfg.model_dump(mode="json", exclude={"out"})
    echo["sim"] = sim_cfg.model_dump(mode="json")
    write_dataset(out, sim.train, seed=sim_cfg.seed, config=echo, truth=sim.truth)
    if sim.test is not None:
        write_dataset(out / "test", sim.test, seed=sim_cfg.seed, config=echo, truth=sim.truth)
    save_run_config(out / CONFIG_FILE, cfg)
    return out


def cmd_fit(cfg: RunConfig) -> Path:
    """Run the chains on ``data`` and write samples, diagnostics and the config echo."""
    data, _, _ = read_dataset(_require(cfg.data, "--data", "fit"))
    out = _output_dir(cfg)
    start = time.perf_counter()
    samples = run_chains(data, cfg.prior, cfg.mcmc)
    runtime = time.perf_counter() - start

    summary: Dict[str, object] = {"runtime": runtime, "warnings": []}
    try:
        report = diagnostics(samples)
    except DiagnosticsError as exc:
        logger.warning("diagnostics skipped: %s", exc)
        summary["warnings"] = [str(exc)]
    else:
        report.table.to_csv(out / "diagnostics.csv", index=False)
        summary.update(report.to_dict())

    path = write_samples(out / SAMPLES_FILE, samples, diagnostics={"warnings": summary["warnings"]})
    write_json(out / "fit_summary.json", {**_run_manifest(cfg, "fit"), **summary})
    if cfg.csv:
        export_samples_csv(out, samples)
    save_run_config(out / CONFIG_FILE, cfg)
    logger.info("fit finished in %.1fs", runtime)
    return path


def _edge_table(report) -> pd.DataFrame:
    rows, cols = edge_index(report.V)
    selected = np.zeros(rows.shape[0], dtype=bool)
    selected[report.selected_edges] = True
    return pd.DataFrame({
        "k": rows + 1,
        "l": cols + 1,
        "prob": report.edge_probs,
        "mean": report.gamma_mean,
        "lower": report.gamma_lower,
        "upper": report.gamma_upper,
        "selected": selected.astype(int),
    })


def cmd_infer(cfg: RunConfig) -> Path:
    """Influential nodes and edges, rank distribution and the sub-network graph."""
    samples, _ = read_samples(_require(cfg.samples, "--samples", "infer"))
    out = _output_dir(cfg)
    report = infer(samples, cfg.edge_threshold, cfg.fdr, cfg.credible_level)
    write_json(out / "inference.json", {**_run_manifest(cfg, "infer"), "sample_seed": samples.seed,
                                        **report.to_dict()})
    pd.DataFrame({"node": np.arange(1, samples.V + 1), "prob": report.node_probs}).to_csv(
        out / "node_probs.csv", index=False)
    _edge_table(report).to_csv(out / "edge_probs.csv", index=False)
    pd.DataFrame({"rank": np.arange(samples.R + 1), "prob": report.reff.probs}).to_csv(
        out / "rank_probs.csv", index=False)
    write_json(out / "subnetwork.json", nx.node_link_data(influential_subnetwork(report)))
    return out / "inference.json"


def _read_networks(path: str, V: int) -> np.ndarray:
    source = Path(path)
    if source.is_dir():
        data, _, _ = read_dataset(source)
        return data.edges
    X, _ = read_edge_matrix(source, V)
    return X


def cmd_classify(cfg: RunConfig) -> Path:
    """Class probabilities and labels for every network in ``networks``."""
    samples, _ = read_samples(_require(cfg.samples, "--samples", "classify"))
    X = _read_networks(_require(cfg.networks, "--networks", "classify"), samples.V)
    out = _output_dir(cfg)
    probs = predict_proba(samples, X)
    path = out / "predictions.csv"
    pd.DataFrame({
        "subject": np.arange(1, X.shape[0] + 1),
        "prob": probs,
        "label": (probs > 0.5).astype(int),
    }).to_csv(path, index=False)
    return path


def _roc_frame(roc: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame(np.asarray(roc).reshape(-1, 2), columns=["fpr", "tpr"])


def _evaluate_samples(cfg: RunConfig, samples: PosteriorSamples, out: Path) -> dict:
    scored: Optional[NetworkDataset] = None
    truth = read_truth(cfg.truth) if cfg.truth else None
    if cfg.data:
        scored, _, dataset_truth = read_dataset(cfg.data)
        truth = truth or dataset_truth
    report = infer(samples, cfg.edge_threshold, cfg.fdr, cfg.credible_level)
    metrics = evaluate_fit(samples, report, truth, scored)
    _roc_frame(np.asarray(metrics.roc)).to_csv(out / "roc.csv", index=False)
    return metrics.to_row()


def cmd_evaluate(cfg: RunConfig) -> Path:
    """
    Metrics of a fit against a truth sidecar and/or labeled networks, AUC of
    external scores, and k-fold cross-validation on ``data``.
    """
    if not (cfg.samples or cfg.scores or cfg.folds):
        raise ValidationError("evaluate needs --samples, --scores or --folds")
    out = _output_dir(cfg)
    result: Dict[str, object] = _run_manifest(cfg, "evaluate")

    if cfg.samples:
        samples, _ = read_samples(cfg.samples)
        result["metrics"] = _evaluate_samples(cfg, samples, out)
    if cfg.scores:
        scores, labels = load_external_scores(cfg.scores)
        auc, roc = roc_auc(scores, labels)
        _roc_frame(roc).to_csv(out / "roc_external.csv", index=False)
        result["external_auc"] = auc
    if cfg.folds:
        data, _, _ = read_dataset(_require(cfg.data, "--data", "cross-validation"))
        cv = kfold_cv(data, cfg.prior, cfg.mcmc, k=cfg.folds)
        pd.DataFrame({
            "subject": np.arange(1, data.n + 1),
            "fold": cv.folds + 1,
            "score": cv.scores,
            "label": cv.labels,
        }).to_csv(out / "cv_scores.csv", index=False)
        _roc_frame(cv.roc).to_csv(out / "roc_cv.csv", index=False)
        result["cv"] = {"k": cfg.folds, "auc": cv.auc, "skipped_folds": [f + 1 for f in cv.skipped],
                        "warnings": cv.warnings}

    path = out / "metrics.json"
    write_json(path, result)
    return path


def cmd_experiment(cfg: RunConfig) -> Path:
    """
    The simulation grid over ``cases`` x ``methods``; with ``sensitivity``
    presets, also one sensitivity table per case and method.
    """
    out = _output_dir(cfg)
    overrides = cfg.prior.model_dump(exclude_defaults=True, exclude={"kind", "R"})
    grid = experiment_table(cfg.cases, cfg.methods, cfg.mcmc, n_test=cfg.n_test,
                            edge_threshold=cfg.edge_threshold, fdr=cfg.fdr, prior_overrides=overrides)
    grid.table.to_csv(out / "experiment.csv", index=False)
    grid.roc.to_csv(out / "experiment_roc.csv", index=False)
    if not grid.overlap.empty:
        grid.overlap.to_csv(out / "experiment_overlap.csv", index=False)

    if cfg.sensitivity:
        tables: List[pd.DataFrame] = []
        for case in cfg.cases:
            sim = simulate(sim_preset(case, seed=cfg.seed))
            for method in cfg.methods:
                table = sensitivity_table(sim.train, sim.truth, method, cfg.sensitivity, cfg.mcmc,
                                          cfg.edge_threshold, cfg.fdr)
                table.insert(0, "method", method)
                table.insert(0, "case", case)
                tables.append(table)
        pd.concat(tables, ignore_index=True).to_csv(out / "sensitivity.csv", index=False)

    write_json(out / "experiment.json", _run_manifest(cfg, "experiment"))
    save_run_config(out / CONFIG_FILE, cfg)
    return out / "experiment.csv"


COMMANDS: Dict[str, Callable[[RunConfig], Path]] = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "infer": cmd_infer,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="saved RunConfig JSON; flags override its fields")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--prior", choices=("bnlc", "bnhc"))
    parser.add_argument("--iters", type=int, help="total sweeps per chain (default 50000)")
    parser.add_argument("--burnin", type=int, help="discarded sweeps (default 30000)")
    parser.add_argument("--thin", type=int, help="keep every thin-th sweep after burn-in (default 10)")
    parser.add_argument("--chains", type=int)
    parser.add_argument("--r", type=int, help="maximum latent dimension R")
    parser.add_argument("--nu", type=float)
    parser.add_argument("--a-delta", dest="a_delta", type=float)
    parser.add_argument("--b-delta", dest="b_delta", type=float)
    parser.add_argument("--edge-threshold", dest="edge_threshold", type=float, help="default 0.05")
    parser.add_argument("--fdr", type=float, help="default 0.05")
    parser.add_argument("--credible-level", dest="credible_level", type=float)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--preset", choices=SIM_PRESETS)
    parser.add_argument("--data", help="dataset directory")
    parser.add_argument("--samples", help="posterior samples file")
    parser.add_argument("--networks", help="edges CSV or dataset directory to classify")
    parser.add_argument("--truth", help="truth sidecar JSON")
    parser.add_argument("--scores", help="external scores CSV (subject,score,label)")
    parser.add_argument("--folds", type=int, help="k for cross-validation")
    parser.add_argument("--n-test", dest="n_test", type=int)
    parser.add_argument("--cases", nargs="+", choices=SIM_PRESETS)
    parser.add_argument("--methods", nargs="+", choices=("bnlc", "bnhc"))
    parser.add_argument("--sensitivity", nargs="+", help="hyperparameter presets, e.g. default sparse-nodes rank-4")
    parser.add_argument("--csv", action="store_true", help="also export samples as CSV")
    parser.add_argument("--progress", action="store_true", help="show a progress bar per chain")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="netclass",
        description="Bayesian classification with network predictors (Network Lasso / Network Horseshoe priors)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or "").strip().splitlines()[0])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        cfg = resolve_config(args)
        path = COMMANDS[args.command](cfg)
    except (ValidationError, FormatError, pydantic.ValidationError) as exc:
        logger.error("%s", exc)
        return EXIT_INVALID
    except NetclassError as exc:
        logger.error("%s", exc)
        return EXIT_FAILED
    except Exception:
        logger.exception("%s failed", args.command)
        return EXIT_FAILED
    logger.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
