"""
File formats.

Dataset directory::

    manifest.json   format name and version, seed, V, n, edge order, config echo
    edges.csv       n rows x q columns, header "k_l" (1-based) in canonical order
    labels.csv      subject,label
    truth.json      optional ground truth of a simulated dataset

Posterior samples are a zip archive of ``.npy`` members (``mu``, ``gamma``,
``xi``, ``lambda`` and ``trace_<name>``) plus ``manifest.json``; every member
carries a fixed timestamp so the same draws always give the same bytes.
"""

import io
import json
import logging
import zipfile
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from .config import RunConfig
from .errors import FormatError
from .network import NetworkDataset, edge_names, n_edges, parse_edge_name, edge_position
from .posterior import PosteriorSamples
from .simulation import GroundTruth

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DATASET_FORMAT = "netclass-dataset"
SAMPLES_FORMAT = "netclass-samples"
EDGE_ORDER = "upper-triangle-row-major"
ZIP_TIMESTAMP = (1980, 1, 1, 0, 0, 0)

PathLike = Union[str, Path]


class NumpyEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, (set, frozenset)):
            return sorted(obj)
        elif isinstance(obj, Path):
            return str(obj)
        return super().default(obj)


def write_json(path: PathLike, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, cls=NumpyEncoder, indent=2, sort_keys=True) + "\n")


def read_json(path: PathLike) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read JSON file {path}: {exc}") from exc


def _check_manifest(manifest: dict, expected: str, source) -> None:
    if manifest.get("format") != expected:
        raise FormatError(f"{source}: expected a {expected} file, found {manifest.get('format')!r}")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"{source}: unsupported format version {manifest.get('format_version')!r} "
            f"(this build reads version {FORMAT_VERSION})"
        )


def _manifest_field(manifest: dict, key: str, cast, source):
    try:
        return cast(manifest[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{source}: manifest field {key!r} is missing or invalid") from exc


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

def write_dataset(directory: PathLike, data: NetworkDataset, seed: int = 0,
                  config: Optional[dict] = None, truth: Optional[GroundTruth] = None) -> Path:
    """Write a dataset directory; returns its path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_json(directory / "manifest.json", {
        "format": DATASET_FORMAT,
        "format_version": FORMAT_VERSION,
        "seed": seed,
        "V": data.V,
        "n": data.n,
        "edge_order": EDGE_ORDER,
        "config": config or {},
        "has_truth": truth is not None,
    })
    pd.DataFrame(data.edges, columns=edge_names(data.V)).to_csv(directory / "edges.csv", index=False)
    pd.DataFrame({"subject": np.arange(1, data.n + 1), "label": data.labels}).to_csv(
        directory / "labels.csv", index=False)
    if truth is not None:
        write_json(directory / "truth.json", {
            "format": "netclass-truth", "format_version": FORMAT_VERSION, **truth.to_dict()})
    logger.info("wrote dataset (V=%d, n=%d) to %s", data.V, data.n, directory)
    return directory


def read_edge_matrix(path: PathLike, V: Optional[int] = None) -> Tuple[np.ndarray, int]:
    """
    Read an edges CSV.

    Columns may come in any order; they are placed by their "k_l" names.

    Returns:
        (n x q matrix in canonical order, V)
    """
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as exc:
        raise FormatError(f"cannot read edge file {path}: {exc}") from exc
    except pd.errors.EmptyDataError:
        raise FormatError(f"edge file {path} is empty")
    try:
        pairs = [parse_edge_name(str(c)) for c in frame.columns]
    except Exception as exc:
        raise FormatError(f"edge file {path}: {exc}") from exc
    if V is None:
        V = max(max(k, l) for k, l in pairs) + 1 if pairs else 1
    q = n_edges(V)
    if len(pairs) != q:
        raise FormatError(f"edge file {path} has {len(pairs)} columns, expected {q} for V={V}")
    positions = [edge_position(k, l, V) for k, l in pairs]
    if sorted(positions) != list(range(q)):
        raise FormatError(f"edge file {path} has duplicate or missing edge columns")
    X = np.empty((frame.shape[0], q))
    X[:, positions] = frame.to_numpy(dtype=float)
    return X, V


def read_dataset(directory: PathLike) -> Tuple[NetworkDataset, dict, Optional[GroundTruth]]:
    """
    Read a dataset directory.

    Returns:
        (dataset, manifest, truth or None)
    """
    directory = Path(directory)
    manifest = read_json(directory / "manifest.json")
    _check_manifest(manifest, DATASET_FORMAT, directory)
    X, V = read_edge_matrix(directory / "edges.csv", _manifest_field(manifest, "V", int, directory))
    try:
        labels = pd.read_csv(directory / "labels.csv")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise FormatError(f"cannot read labels in {directory}: {exc}") from exc
    if "label" not in labels.columns:
        raise FormatError(f"{directory}/labels.csv lacks a label column")
    data = NetworkDataset(X, labels["label"].to_numpy(), V=V)
    truth = read_truth(directory / "truth.json") if (directory / "truth.json").exists() else None
    return data, manifest, truth


def read_truth(path: PathLike) -> GroundTruth:
    payload = read_json(path)
    if payload.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {payload.get('format_version')!r}")
    return GroundTruth.from_dict(payload)


# ---------------------------------------------------------------------------
# Posterior samples
# ---------------------------------------------------------------------------

def _write_member(archive: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=ZIP_TIMESTAMP)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    archive.writestr(info, data)


def _array_bytes(arr: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    np.lib.format.write_array(buffer, np.ascontiguousarray(arr), allow_pickle=False)
    return buffer.getvalue()


def write_samples(path: PathLike, samples: PosteriorSamples, diagnostics: Optional[dict] = None) -> Path:
    """Write posterior samples; byte-identical for identical draws and config."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": SAMPLES_FORMAT,
        "format_version": FORMAT_VERSION,
        "prior_kind": samples.prior_kind,
        "seed": samples.seed,
        "V": samples.V,
        "R": samples.R,
        "chains": samples.n_chains,
        "draws_per_chain": samples.draws_per_chain,
        "edge_order": EDGE_ORDER,
        "config": samples.config,
        "traces": sorted(samples.extras),
        "diagnostics": diagnostics or {},
    }
    with zipfile.ZipFile(path, "w") as archive:
        _write_member(archive, "manifest.json",
                      json.dumps(manifest, cls=NumpyEncoder, indent=2, sort_keys=True).encode())
        for name, arr in (("mu", samples.mu), ("gamma", samples.gamma), ("xi", samples.xi), ("lambda", samples.lam)):
            _write_member(archive, f"{name}.npy", _array_bytes(arr))
        for name in sorted(samples.extras):
            _write_member(archive, f"trace_{name}.npy", _array_bytes(samples.extras[name]))
    logger.info("wrote %d draws x %d chain(s) to %s", samples.draws_per_chain, samples.n_chains, path)
    return path


def read_samples(path: PathLike) -> Tuple[PosteriorSamples, dict]:
    """
    Read a posterior samples file.

    Returns:
        (samples, manifest)

    Raises:
        FormatError: on an unreadable archive or an unknown format version.
    """
    path = Path(path)
    try:
        with zipfile.ZipFile(path) as archive:
            manifest = json.loads(archive.read("manifest.json"))
            _check_manifest(manifest, SAMPLES_FORMAT, path)

            def array(name):
                return np.lib.format.read_array(io.BytesIO(archive.read(f"{name}.npy")), allow_pickle=False)

            arrays = {name: array(name) for name in ("mu", "gamma", "xi", "lambda")}
            extras = {name: array(f"trace_{name}") for name in manifest.get("traces", [])}
    except (OSError, KeyError, ValueError, zipfile.BadZipFile) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"cannot read samples file {path}: {exc}") from exc
    samples = PosteriorSamples(
        mu=arrays["mu"], gamma=arrays["gamma"], xi=arrays["xi"], lam=arrays["lambda"],
        prior_kind=_manifest_field(manifest, "prior_kind", str, path),
        seed=_manifest_field(manifest, "seed", int, path),
        config=manifest.get("config", {}), extras=extras,
    )
    return samples, manifest


def export_samples_csv(directory: PathLike, samples: PosteriorSamples) -> None:
    """Debug export: samples_mu.csv, samples_gamma.csv, samples_xi.csv, samples_lambda.csv."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    chain = np.repeat(np.arange(samples.n_chains), samples.draws_per_chain)
    draw = np.tile(np.arange(samples.draws_per_chain), samples.n_chains)
    index = {"chain": chain, "draw": draw}

    def frame(values, columns):
        return pd.concat([pd.DataFrame(index), pd.DataFrame(values, columns=columns)], axis=1)

    frame(samples.pooled("mu")[:, None], ["mu"]).to_csv(directory / "samples_mu.csv", index=False)
    frame(samples.pooled("gamma"), edge_names(samples.V)).to_csv(directory / "samples_gamma.csv", index=False)
    frame(samples.pooled("xi"), [str(k + 1) for k in range(samples.V)]).to_csv(
        directory / "samples_xi.csv", index=False)
    frame(samples.pooled("lam"), [str(r + 1) for r in range(samples.R)]).to_csv(
        directory / "samples_lambda.csv", index=False)


# ---------------------------------------------------------------------------
# Run configurations
# ---------------------------------------------------------------------------

def save_run_config(path: PathLike, cfg: RunConfig) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(cfg.model_dump_json(indent=2) + "\n")
    return path


def load_run_config(path: PathLike) -> RunConfig:
    """
    Read a saved RunConfig.

    Raises:
        FormatError: if the file cannot be read.
        pydantic.ValidationError: if its content is not a valid configuration.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read config file {path}: {exc}") from exc
    return RunConfig.model_validate_json(text)
