"""Command-line pipelines: synthesize data, adapt, evaluate.

Three subcommands cover the full experiment loop:

* ``synth`` writes a two-domain benchmark as CSV files plus a metadata
  JSON echoing the generating configuration.
* ``adapt`` loads labeled source and unlabeled target CSVs, runs the
  hyperparameter grid search, classifies the target with the winning
  transform, and writes a JSON report plus the learned transform CSV.
* ``eval`` applies a saved transform to new CSVs and scores nearest
  neighbor predictions against supplied truth labels.

Dataset CSVs are UTF-8, comma-separated, '.'-decimal, LF line endings,
with an optional header row (detected by any non-numeric cell in the
first row).  Labeled files carry the feature columns first and a final
0-based integer label column.

Reports are strict JSON with top-level keys ``schema_version``,
``config_echo``, ``cells``, ``winner``, ``predictions``, ``metrics``
and ``timings``; reruns with the same inputs and seed are byte
identical apart from ``timings``.  Exit codes: 0 success, 1 numerical
failure, 2 I/O or configuration failure; failures print a machine
readable ``{"error": {"kind", "message"}}`` object to stdout.  The env
var ITDA_THREADS overrides the ``--threads`` flag.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .data_model import (
    STANDARDIZE_MODES,
    STANDARDIZE_OFF,
    STANDARDIZE_POOLED,
    DataValidationError,
    SourceDataset,
    TargetDataset,
    Transform,
    pooled_standardizer,
    standardize_pair,
)
from .evaluation import accuracy, confusion_counts, knn1_classify, per_class_accuracy
from .model_selection import (
    CellResult,
    GridSearchFailure,
    HyperGrid,
    SelectionReport,
    grid_search,
)
from .optimizer import NumericalFailure, OptimizerConfig
from .synthetic import SyntheticConfig, generate

SCHEMA_VERSION = 1


class CsvFormatError(ValueError):
    """A dataset or transform file violates the CSV contract."""


class ConfigError(ValueError):
    """Flags or config-file contents are invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one adapt run needs; flags mirror these one-to-one."""

    source: str
    target: str
    out: str
    dims: tuple[int, ...] = (2, 3, 5)
    lambdas: tuple[float, ...] = (0.0, 1.0, 4.0)
    standardize: str = STANDARDIZE_POOLED
    restarts: int = 3
    seed: int = 0
    max_iters: int = 300
    grad_tol: float = 1e-5
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    min_step: float = 1e-12
    threads: int = 0
    truth: str | None = None
    transform_out: str | None = None
    label_map: str | None = None

    def __post_init__(self) -> None:
        if self.standardize not in STANDARDIZE_MODES:
            raise ConfigError(
                f"standardize must be one of {STANDARDIZE_MODES}, got {self.standardize!r}"
            )
        if self.threads < 0:
            raise ConfigError(f"threads must be >= 0 (0 = auto), got {self.threads}")

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            armijo_c=self.armijo_c,
            backtrack_factor=self.backtrack_factor,
            initial_step=self.initial_step,
            min_step=self.min_step,
            seed=self.seed,
        )


# ---------------------------------------------------------------------------
# CSV parsing and writing


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _data_rows(path: str) -> list[tuple[int, list[str]]]:
    """Non-blank (line_number, cells) rows with any header row dropped."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    rows = [
        (number, [cell.strip() for cell in line.split(",")])
        for number, line in enumerate(text.split("\n"), start=1)
        if line.strip()
    ]
    if rows and not all(_is_number(cell) for cell in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return rows


def _parse_cell(path: str, line: int, cell: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise CsvFormatError(
            f"{path}: line {line}: non-numeric value {cell!r}"
        ) from None


def load_matrix(path: str) -> np.ndarray:
    """Read a rectangular float matrix (used for saved transforms)."""
    rows = _data_rows(path)
    width = len(rows[0][1])
    out = np.empty((len(rows), width))
    for r, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise CsvFormatError(
                f"{path}: line {line}: expected {width} columns, got {len(cells)}"
            )
        for c, cell in enumerate(cells):
            out[r, c] = _parse_cell(path, line, cell)
    return out


def _parse_label(path: str, line: int, cell: str) -> int:
    value = _parse_cell(path, line, cell)
    if not float(value).is_integer() or value < 0:
        raise CsvFormatError(
            f"{path}: line {line}: label must be a non-negative integer, got {cell!r}"
        )
    return int(value)


def load_csv(path: str, labeled: bool) -> SourceDataset | TargetDataset:
    """Read a dataset file; labeled files end in an integer label column."""
    rows = _data_rows(path)
    width = len(rows[0][1])
    if labeled and width < 2:
        raise CsvFormatError(f"{path}: labeled data needs >= 2 columns")
    n_features = width - 1 if labeled else width
    features = np.empty((len(rows), n_features))
    labels = np.empty(len(rows), dtype=np.int64)
    for r, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise CsvFormatError(
                f"{path}: line {line}: expected {width} columns, got {len(cells)}"
            )
        for c in range(n_features):
            features[r, c] = _parse_cell(path, line, cells[c])
        if labeled:
            labels[r] = _parse_label(path, line, cells[-1])
    try:
        if labeled:
            return SourceDataset(features, labels, int(labels.max()) + 1)
        return TargetDataset(features)
    except DataValidationError as exc:
        raise CsvFormatError(f"{path}: {exc}") from exc


def load_labels(path: str) -> np.ndarray:
    """Read one non-negative integer label per line (header optional)."""
    rows = _data_rows(path)
    labels = np.empty(len(rows), dtype=np.int64)
    for r, (line, cells) in enumerate(rows):
        if len(cells) != 1:
            raise CsvFormatError(
                f"{path}: line {line}: expected 1 column, got {len(cells)}"
            )
        labels[r] = _parse_label(path, line, cells[0])
    return labels


def _format_row(values: np.ndarray) -> str:
    return ",".join(f"{v:.17g}" for v in values)


def save_matrix(path: str, matrix: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(_format_row(row) + "\n")


def save_labeled_csv(path: str, features: np.ndarray, labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row, label in zip(features, labels):
            fh.write(_format_row(row) + f",{int(label)}\n")


def save_labels(path: str, labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for label in labels:
            fh.write(f"{int(label)}\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


# ---------------------------------------------------------------------------
# adapt pipeline


def _none_if_nan(value: float) -> float | None:
    return None if isinstance(value, float) and math.isnan(value) else value


def _cell_json(cell: CellResult) -> dict:
    return {
        "d": cell.d,
        "lam": cell.lam,
        "eps_s": _none_if_nan(cell.eps_s),
        "i_t": _none_if_nan(cell.i_t),
        "i_st": _none_if_nan(cell.i_st),
        "total": _none_if_nan(cell.total),
        "termination": cell.termination.value if cell.termination else None,
        "iterations": cell.iterations,
        "failed": cell.failed,
        "error": cell.error,
    }


def _winner_json(report: SelectionReport, transform_file: str, space: str) -> dict:
    winner = report.winner
    records = winner.trace.records if winner.trace else ()
    return {
        "index": report.winner_index,
        "d": winner.d,
        "lam": winner.lam,
        "eps_s": winner.eps_s,
        "tie_break": report.tie_break,
        "transform_file": transform_file,
        "transform_space": space,
        "trajectory": {
            "total": [r.total for r in records],
            "i_t": [r.i_t for r in records],
            "i_st": [r.i_st for r in records],
            "step_size": [r.step_size for r in records],
            "trace_gram": [r.trace_gram for r in records],
        },
    }


def _metrics_json(
    predicted: np.ndarray, truth: np.ndarray, num_classes: int
) -> dict:
    per_class = per_class_accuracy(predicted, truth, num_classes)
    return {
        "accuracy": accuracy(predicted, truth),
        "per_class_accuracy": [_none_if_nan(v) for v in per_class.tolist()],
        "confusion": confusion_counts(predicted, truth, num_classes).tolist(),
        "n_scored": int(truth.shape[0]),
    }


def _load_label_map(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        mapping = json.load(fh)
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: label map must be a JSON object")
    return mapping


def _resolve_threads(flag_value: int) -> int:
    env = os.environ.get("ITDA_THREADS")
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            value = 0
        if value < 1:
            raise ConfigError(f"ITDA_THREADS must be a positive integer, got {env!r}")
        return value
    if flag_value > 0:
        return flag_value
    return os.cpu_count() or 1


def _raw_space_transform(
    transform: Transform, source: SourceDataset, target: TargetDataset, mode: str
) -> tuple[Transform, str]:
    """Fold standardization scaling into L where that is exact.

    Pairwise distances ignore the mean shift, so for pooled scaling the
    matrix ``L / std`` applied to raw features reproduces the learned
    distances exactly.  Per-domain scaling uses different factors per
    domain and cannot be folded into one matrix; the learned-space
    matrix is saved instead.
    """
    if mode == STANDARDIZE_OFF:
        return transform, "raw"
    if mode == STANDARDIZE_POOLED:
        stats = pooled_standardizer(source, target)
        return Transform(transform.matrix / stats.std[None, :]), "raw"
    return transform, "standardized"


def run_adapt(config: ExperimentConfig) -> dict:
    """Full pipeline: load, standardize, grid-search, classify, report."""
    t_start = time.perf_counter()
    source = load_csv(config.source, labeled=True)
    target = load_csv(config.target, labeled=False)
    assert isinstance(source, SourceDataset) and isinstance(target, TargetDataset)
    truth = load_labels(config.truth) if config.truth else None
    if truth is not None:
        if truth.shape[0] != target.n:
            raise CsvFormatError(
                f"{config.truth}: {truth.shape[0]} labels for {target.n} target rows"
            )
        if truth.max() >= source.num_classes:
            raise CsvFormatError(
                f"{config.truth}: label {truth.max()} out of range for "
                f"{source.num_classes} classes"
            )
    label_map = _load_label_map(config.label_map) if config.label_map else None
    threads = _resolve_threads(config.threads)
    grid = HyperGrid(dims=config.dims, lambdas=config.lambdas)
    std_source, std_target = standardize_pair(source, target, config.standardize)
    t_loaded = time.perf_counter()

    report = grid_search(
        std_source,
        std_target,
        grid,
        config.optimizer_config(),
        restarts=config.restarts,
        workers=threads,
    )
    t_grid = time.perf_counter()

    winner_transform = report.winner.transform
    assert winner_transform is not None
    predicted = knn1_classify(winner_transform, std_source, std_target)
    metrics = (
        _metrics_json(predicted, truth, source.num_classes)
        if truth is not None
        else None
    )

    saved_transform, space = _raw_space_transform(
        winner_transform, source, target, config.standardize
    )
    transform_out = config.transform_out or (
        str(Path(config.out).with_suffix("")) + ".transform.csv"
    )
    save_matrix(transform_out, saved_transform.matrix)

    config_echo = {
        "source": config.source,
        "target": config.target,
        "out": config.out,
        "dims": list(config.dims),
        "lambdas": list(config.lambdas),
        "standardize": config.standardize,
        "restarts": config.restarts,
        "seed": config.seed,
        "max_iters": config.max_iters,
        "grad_tol": config.grad_tol,
        "armijo_c": config.armijo_c,
        "backtrack_factor": config.backtrack_factor,
        "initial_step": config.initial_step,
        "min_step": config.min_step,
        "threads": threads,
        "truth": config.truth,
        "transform_out": transform_out,
        "label_map": label_map,
        "version": __version__,
        "n_source": source.n,
        "n_target": target.n,
        "n_features": source.dim,
        "num_classes": source.num_classes,
    }
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config_echo": config_echo,
        "cells": [_cell_json(c) for c in report.cells],
        "winner": _winner_json(report, transform_out, space),
        "predictions": [int(p) for p in predicted],
        "metrics": metrics,
        "timings": {
            "load_s": t_loaded - t_start,
            "grid_search_s": t_grid - t_loaded,
            "total_s": time.perf_counter() - t_start,
        },
    }
    _write_json(config.out, payload)
    return payload


# ---------------------------------------------------------------------------
# synth pipeline


def run_synth(config: SyntheticConfig, out_dir: str) -> dict:
    """Write source.csv, target.csv, target_labels.csv and meta.json."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    source, target, truth = generate(config)
    files = {
        "source": "source.csv",
        "target": "target.csv",
        "target_labels": "target_labels.csv",
    }
    save_labeled_csv(str(directory / files["source"]), source.features, source.labels)
    save_matrix(str(directory / files["target"]), target.features)
    save_labels(str(directory / files["target_labels"]), truth)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "files": files,
        "rows": {"source": source.n, "target": target.n},
        "version": __version__,
    }
    _write_json(str(directory / "meta.json"), meta)
    return meta


# ---------------------------------------------------------------------------
# eval pipeline


def run_eval(
    transform_path: str,
    source_path: str,
    target_path: str,
    truth_path: str,
    standardize: str = STANDARDIZE_OFF,
) -> dict:
    """Score a saved transform on a labeled evaluation pair."""
    transform = Transform(load_matrix(transform_path))
    source = load_csv(source_path, labeled=True)
    target = load_csv(target_path, labeled=False)
    assert isinstance(source, SourceDataset) and isinstance(target, TargetDataset)
    truth = load_labels(truth_path)
    if truth.shape[0] != target.n:
        raise CsvFormatError(
            f"{truth_path}: {truth.shape[0]} labels for {target.n} target rows"
        )
    if truth.max() >= source.num_classes:
        raise CsvFormatError(
            f"{truth_path}: label {truth.max()} out of range for "
            f"{source.num_classes} classes"
        )
    source, target = standardize_pair(source, target, standardize)
    predicted = knn1_classify(transform, source, target)
    return {
        "schema_version": SCHEMA_VERSION,
        "metrics": _metrics_json(predicted, truth, source.num_classes),
        "predictions": [int(p) for p in predicted],
        "version": __version__,
    }


# ---------------------------------------------------------------------------
# argument parsing


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        ) from None


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}"
        ) from None


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults, optional config file, and explicit flags."""
    merged: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            from_file = json.load(fh)
        if not isinstance(from_file, dict):
            raise ConfigError(f"{args.config}: config file must be a JSON object")
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = set(from_file) - known
        if unknown:
            raise ConfigError(f"{args.config}: unknown config keys {sorted(unknown)}")
        merged.update(from_file)
    for f in fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            merged[f.name] = value
    for key in ("dims", "lambdas"):
        if key in merged and not isinstance(merged[key], tuple):
            merged[key] = tuple(merged[key])
    if "dims" in merged:
        merged["dims"] = tuple(int(v) for v in merged["dims"])
    if "lambdas" in merged:
        merged["lambdas"] = tuple(float(v) for v in merged["lambdas"])
    for required in ("source", "target", "out"):
        if not merged.get(required):
            raise ConfigError(f"missing required setting: --{required}")
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="itda",
        description="Learn a low-rank metric aligning a labeled source "
        "domain with an unlabeled target domain, then classify by nearest "
        "neighbor.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a two-domain benchmark")
    synth.add_argument("--out-dir", default=".", help="directory for the CSV files")
    for name, kind in (
        ("num-classes", int), ("signal-dim", int), ("noise-dim", int),
        ("points-per-class", int), ("cluster-std", float),
        ("class-separation", float), ("rotation-angle", float),
        ("translation", float), ("noise-std", float), ("seed", int),
    ):
        synth.add_argument(f"--{name}", type=kind, default=None)
    synth.set_defaults(func=_cmd_synth)

    adapt = sub.add_parser("adapt", help="learn a transform and classify the target")
    adapt.add_argument("--config", default=None, help="JSON file supplying any flag")
    adapt.add_argument("--source", default=None, help="labeled source CSV")
    adapt.add_argument("--target", default=None, help="unlabeled target CSV")
    adapt.add_argument("--out", default=None, help="report JSON path")
    adapt.add_argument("--dims", type=_parse_int_list, default=None,
                       help="candidate output dims, e.g. 2,3,5")
    adapt.add_argument("--lambdas", type=_parse_float_list, default=None,
                       help="candidate domain weights, e.g. 0,1,4")
    adapt.add_argument("--standardize", choices=STANDARDIZE_MODES, default=None)
    adapt.add_argument("--restarts", type=int, default=None)
    adapt.add_argument("--seed", type=int, default=None)
    adapt.add_argument("--max-iters", type=int, default=None)
    adapt.add_argument("--grad-tol", type=float, default=None)
    adapt.add_argument("--armijo-c", type=float, default=None)
    adapt.add_argument("--backtrack-factor", type=float, default=None)
    adapt.add_argument("--initial-step", type=float, default=None)
    adapt.add_argument("--min-step", type=float, default=None)
    adapt.add_argument("--threads", type=int, default=None,
                       help="grid-cell worker processes (0 = all cores)")
    adapt.add_argument("--truth", default=None,
                       help="optional target labels for scoring")
    adapt.add_argument("--transform-out", default=None,
                       help="learned transform CSV (default: <out>.transform.csv)")
    adapt.add_argument("--label-map", default=None,
                       help="JSON mapping of label index to original name")
    adapt.set_defaults(func=_cmd_adapt)

    evaluate = sub.add_parser("eval", help="score a saved transform")
    evaluate.add_argument("--transform", required=True)
    evaluate.add_argument("--source", required=True)
    evaluate.add_argument("--target", required=True)
    evaluate.add_argument("--truth", required=True)
    evaluate.add_argument("--standardize", choices=STANDARDIZE_MODES,
                          default=STANDARDIZE_OFF)
    evaluate.add_argument("--out", default=None,
                          help="metrics JSON path (default: stdout)")
    evaluate.set_defaults(func=_cmd_eval)
    return parser


def _cmd_synth(args: argparse.Namespace) -> int:
    overrides = {
        name: getattr(args, name)
        for name in (
            "num_classes", "signal_dim", "noise_dim", "points_per_class",
            "cluster_std", "class_separation", "rotation_angle",
            "translation", "noise_std", "seed",
        )
        if getattr(args, name) is not None
    }
    config = SyntheticConfig(**overrides)
    meta = run_synth(config, args.out_dir)
    print(json.dumps(meta, sort_keys=True))
    return 0


def _cmd_adapt(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    payload = run_adapt(config)
    summary = {
        "out": config.out,
        "winner": {k: payload["winner"][k] for k in ("d", "lam", "eps_s")},
        "accuracy": payload["metrics"]["accuracy"] if payload["metrics"] else None,
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    payload = run_eval(
        args.transform, args.source, args.target, args.truth, args.standardize
    )
    if args.out:
        _write_json(args.out, payload)
        print(json.dumps({"out": args.out, "accuracy": payload["metrics"]["accuracy"]},
                         sort_keys=True))
    else:
        print(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False))
    return 0


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": {"kind": kind, "message": message}}, sort_keys=True))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        _emit_error("io", str(exc))
        return 2
    except (NumericalFailure, GridSearchFailure) as exc:
        _emit_error("numerical", str(exc))
        return 1
    except (CsvFormatError, ConfigError, DataValidationError,
            json.JSONDecodeError) as exc:
        _emit_error("config", str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
