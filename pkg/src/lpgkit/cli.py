"""``lpgkit`` command line: stats, encode, train, complete, ablate, synth.

Settings resolve as flags > ``--config`` JSON > defaults. ``LPGKIT_SEED``
replaces the default seed when neither a flag nor the config sets one.
Every command that writes files also writes a ``*.manifest.json`` with the
resolved settings, input digests, seed and tool version.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .ablation import RunSettings, config_names, default_jobs, run_pairwise_ablation, write_report
from .encoder import encode_entities
from .errors import InvalidConfig, LpgError, UnknownTarget
from .gnn import ModelConfig, save_checkpoint
from .gnn.adjacency import build_normalized_adjacency
from .graph import PropertyGraph
from .lpgio import dataset_stats, load_lpg_csv, load_lpg_jsonl, save_lpg_jsonl
from .miniatures import MINIATURES
from .schema import SchemaOptions, infer_schema, restrict_schema
from .synth import PlantedSpec, write_fixture
from .tasks import (
    LABEL,
    PROPERTY,
    CompletionTask,
    PreparedTask,
    prepare_task,
    resolve_label_targets,
)
from .train import CLASSIFICATION, TargetScaler, TrainConfig, predict, train

SEED_ENV = "LPGKIT_SEED"

SCHEMA_DEFAULTS = {
    "categorical_threshold": 32,
    "text_dim": 64,
    "layout": "key",
    "discretize": False,
}
TRAIN_DEFAULTS = {
    **SCHEMA_DEFAULTS,
    "model": "gcn",
    "features": "all",
    "exclude": "",
    "epochs": 100,
    "batch_size": 32,
    "lr": 0.01,
    "hidden": 64,
    "heads": 4,
    "sampler": "subgraph",
    "nodes_per_batch": None,
    "split_seed": 0,
    "ratios": "0.8,0.1,0.1",
    "structure": "constant",
    "mode": "auto",
}
DEFAULTS: dict[str, dict[str, Any]] = {
    "stats": {"format": "text"},
    "encode": {**SCHEMA_DEFAULTS, "entity": "vertex", "include": None},
    "train": dict(TRAIN_DEFAULTS),
    "complete": dict(TRAIN_DEFAULTS),
    "ablate": {**TRAIN_DEFAULTS, "pairs": "on", "seeds": "0,1,2,3,4", "jobs": None, "per_label": False},
    "synth": {"spec": None, "miniature": None},
}
# names that identify inputs and outputs rather than settings
_PATH_FLAGS = {"input", "out", "out_dir", "schema_out", "out_csv", "out_svg", "config"}


class CliError(Exception):
    """Bad invocation detected after argument parsing."""


# ---------------------------------------------------------------------------
# settings


def _read_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise InvalidConfig("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def resolve_settings(command: str, args: argparse.Namespace, environ=os.environ) -> dict[str, Any]:
    """Merge defaults, config file and flags; flags win."""
    defaults = dict(DEFAULTS[command])
    if command != "synth" and command != "stats":
        defaults["seed"] = 0
    if "seed" in defaults and environ.get(SEED_ENV):
        try:
            defaults["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise InvalidConfig(f"{SEED_ENV} must be an integer") from None
    config = _read_config(getattr(args, "config", None))
    unknown = set(config) - set(defaults) - _PATH_FLAGS
    if unknown:
        raise InvalidConfig(f"unknown config keys: {', '.join(sorted(unknown))}")
    resolved = {**defaults, **{k: v for k, v in config.items() if k in defaults}}
    for key, value in vars(args).items():
        if key in defaults and value is not None:
            resolved[key] = value
    if command == "ablate" and resolved["jobs"] is None:
        resolved["jobs"] = default_jobs()
    return resolved


def _schema_options(s: dict[str, Any]) -> SchemaOptions:
    if s["layout"] not in ("key", "appendix"):
        raise InvalidConfig(f"unknown layout {s['layout']!r}")
    return SchemaOptions(
        categorical_threshold=int(s["categorical_threshold"]),
        text_dim=int(s["text_dim"]),
        discretize_scalars=bool(s["discretize"]),
        appendix_layout=s["layout"] == "appendix",
    )


def _train_config(s: dict[str, Any]) -> TrainConfig:
    return TrainConfig(
        epochs=int(s["epochs"]),
        batch_size=int(s["batch_size"]),
        lr0=float(s["lr"]),
        seed=int(s["seed"]),
        sampler=s["sampler"],
        nodes_per_batch=None if s["nodes_per_batch"] is None else int(s["nodes_per_batch"]),
    )


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _ratios(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in _split_list(text))
    except ValueError:
        raise InvalidConfig(f"bad ratios {text!r}") from None


# ---------------------------------------------------------------------------
# inputs and manifests


def _input_files(path: Path) -> list[Path]:
    if path.is_dir():
        return [path / "nodes.csv", path / "edges.csv", path / "manifest.json"]
    return [path]


def load_input(path: str) -> PropertyGraph:
    """A ``.jsonl`` file, or a directory holding nodes.csv, edges.csv and manifest.json."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such input: {path}")
    if p.is_dir():
        nodes, edges, manifest = _input_files(p)
        return load_lpg_csv(nodes, edges, manifest)
    return load_lpg_jsonl(p)


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: Path, command: str, settings: dict[str, Any], inputs: Sequence[str]) -> None:
    digests = {}
    for name in inputs:
        for f in _input_files(Path(name)):
            digests[f.name if len(inputs) == 1 else str(f)] = file_digest(f)
    doc = {
        "tool": "lpgkit",
        "version": __version__,
        "command": command,
        "seed": settings.get("seed"),
        "settings": settings,
        "inputs": digests,
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _manifest_path(out: Path) -> Path:
    if out.is_dir():
        return out / "manifest.json"
    return out.with_name(out.name + ".manifest.json")


# ---------------------------------------------------------------------------
# tasks


def build_task(graph: PropertyGraph, kind: str, target: str, mode: str, exclude: str) -> CompletionTask:
    excluded = tuple(_split_list(exclude))
    if kind == LABEL:
        return CompletionTask(LABEL, resolve_label_targets(graph, target), exclude=excluded)
    if kind == PROPERTY:
        if target not in graph.key_universe("vertex"):
            raise UnknownTarget(target)
        return CompletionTask(PROPERTY, (target,), mode, excluded)
    raise InvalidConfig(f"unknown task kind {kind!r}")


def _task_kind_from_train(graph: PropertyGraph, task: str, target: str) -> tuple[str, str]:
    if task == "node-reg":
        return PROPERTY, "regress"
    if task != "node-class":
        raise InvalidConfig(f"unknown task {task!r}")
    labels = graph.label_universe("vertex")
    parts = _split_list(target)
    if any(c in t for t in parts for c in "*?[") or any(t in labels for t in parts):
        return LABEL, "auto"
    return PROPERTY, "classify"


def _prepare(graph: PropertyGraph, kind: str, mode: str, s: dict[str, Any]) -> PreparedTask:
    task = build_task(graph, kind, s["target"], mode, s["exclude"])
    return prepare_task(graph, task, int(s["split_seed"]), _ratios(s["ratios"]), _schema_options(s))


def _fit(prepared: PreparedTask, s: dict[str, Any]):
    names = config_names(prepared, s["features"])
    x = prepared.feature_subset(names, s["structure"])
    tt = prepared.targets
    tc = replace(_train_config(s), task=tt.task_type, num_classes=max(tt.num_classes, 2))
    mc = ModelConfig(s["model"], x.shape[1], tc.out_dim, int(s["hidden"]), int(s["heads"]), seed=int(s["seed"]))
    adj = build_normalized_adjacency(prepared.graph)
    model, report = train(adj, x, tt.values, prepared.masks, mc, tc)
    return adj, x, model, report


# ---------------------------------------------------------------------------
# commands


def cmd_stats(args, s, out) -> None:
    stats = dataset_stats(load_input(args.input))
    if s["format"] == "json":
        doc = {**stats.as_row(), "n_labels": stats.n_labels, "label_fractions": stats.label_fractions}
        out.write(json.dumps(doc, sort_keys=True) + "\n")
        return
    row = stats.as_row()
    out.write(" ".join(f"{k}={v}" for k, v in row.items()) + f" n_labels={stats.n_labels}\n")
    for lab, frac in stats.label_fractions.items():
        out.write(f"label {lab} {frac:.4f}\n")


def cmd_encode(args, s, out) -> None:
    graph = load_input(args.input)
    schema = infer_schema(graph, s["entity"], _schema_options(s))
    if s["include"] is not None:
        schema = restrict_schema(schema, _split_list(s["include"]))
    fm = encode_entities(schema, graph)
    target = Path(args.out)
    fm.save(target)
    if args.schema_out:
        Path(args.schema_out).write_text(schema.dumps() + "\n", encoding="utf-8")
    write_manifest(_manifest_path(target), "encode", s, [args.input])
    out.write(f"rows={fm.n} columns={fm.d}\n")


def cmd_train(args, s, out) -> None:
    graph = load_input(args.input)
    kind, mode = _task_kind_from_train(graph, s["task"], s["target"])
    if s["mode"] != "auto" and s["task"] == "node-class":
        mode = s["mode"]
    prepared = _prepare(graph, kind, mode, s)
    _, _, model, report = _fit(prepared, s)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out_dir / "model.lpgm", prepared.schema.digest(),
                    {"features": s["features"], "task": prepared.task.name})
    (out_dir / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out_dir / "summary.json").write_text(report.summary_json() + "\n", encoding="utf-8")
    write_manifest(out_dir / "manifest.json", "train", s, [args.input])
    out.write(f"test_{report.metric}={report.test_metric:.6f} best_epoch={report.best_epoch}\n")


def cmd_complete(args, s, out) -> None:
    graph = load_input(args.input)
    prepared = _prepare(graph, s["kind"], s["mode"], s)
    adj, x, model, report = _fit(prepared, s)
    tt = prepared.targets
    scaler = None if tt.task_type == CLASSIFICATION else TargetScaler(report.target_mean, report.target_std)
    raw = predict(model, adj, x, scaler)
    ids = graph.vertex_ids()
    train_m, val_m, test_m = prepared.masks
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "split", "target", "prediction"])
    for i in np.flatnonzero(tt.eligible):
        split = "train" if train_m[i] else "val" if val_m[i] else "test" if test_m[i] else "none"
        if tt.task_type == CLASSIFICATION:
            truth, guess = tt.class_names[int(tt.values[i])], tt.class_names[int(np.argmax(raw[i]))]
        else:
            truth, guess = repr(float(tt.values[i])), repr(float(raw[i, 0]))
        w.writerow([int(ids[i]), split, truth, guess])
    target = Path(args.out)
    target.write_text(buf.getvalue(), encoding="utf-8")
    write_manifest(_manifest_path(target), "complete", s, [args.input])
    out.write(f"masked_{report.metric}={report.test_metric:.6f} rows={int(tt.eligible.sum())}\n")


def cmd_ablate(args, s, out) -> None:
    if s["pairs"] not in ("on", "off"):
        raise InvalidConfig("--pairs takes on or off")
    graph = load_input(args.input)
    prepared = _prepare(graph, s["kind"], s["mode"], s)
    seeds = [int(x) for x in _split_list(s["seeds"])]
    if not seeds:
        raise InvalidConfig("no seeds given")
    settings = RunSettings(_train_config(s), int(s["hidden"]), int(s["heads"]), s["structure"], int(s["jobs"]))
    report = run_pairwise_ablation(prepared, s["model"], seeds, settings,
                                   pairs=s["pairs"] == "on", per_label=bool(s["per_label"]))
    csv_path, svg_path = Path(args.out_csv), Path(args.out_svg)
    write_report(report, csv_path, svg_path)
    recorded = {k: v for k, v in s.items() if k != "jobs"}
    write_manifest(_manifest_path(csv_path), "ablate", recorded, [args.input])
    out.write(f"baseline_{report.metric}={report.baseline:.6f} cells={len(report.cells)}\n")


def cmd_synth(args, s, out) -> None:
    out_dir = Path(args.out)
    if (s["spec"] is None) == (s["miniature"] is None):
        raise CliError("give exactly one of --spec or --miniature")
    if s["miniature"] is not None:
        if s["miniature"] not in MINIATURES:
            raise CliError(f"unknown miniature {s['miniature']!r}; choose from {', '.join(MINIATURES)}")
        out_dir.mkdir(parents=True, exist_ok=True)
        graph = MINIATURES[s["miniature"]]()
        save_lpg_jsonl(graph, out_dir / "graph.jsonl")
        write_manifest(out_dir / "manifest.json", "synth", s, [])
        out.write(f"vertices={graph.n} edges={graph.m}\n")
        return
    try:
        doc = json.loads(Path(s["spec"]).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"bad spec file: {exc}") from None
    spec = PlantedSpec.from_json(doc)
    paths = write_fixture(spec, out_dir)
    write_manifest(out_dir / "manifest.json", "synth", {**s, "planted": asdict(spec)}, [s["spec"]])
    cert = json.loads(paths["certificate"].read_text(encoding="utf-8"))
    out.write(f"vertices={spec.n} edges={cert['edges']} "
              f"property_bayes_accuracy={cert['property_bayes_accuracy']:.4f}\n")


COMMANDS = {
    "stats": cmd_stats,
    "encode": cmd_encode,
    "train": cmd_train,
    "complete": cmd_complete,
    "ablate": cmd_ablate,
    "synth": cmd_synth,
}


# ---------------------------------------------------------------------------
# parser


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--categorical-threshold", type=int)
    p.add_argument("--text-dim", type=int)
    p.add_argument("--layout", choices=["key", "appendix"])
    p.add_argument("--discretize", action="store_true", default=None, help="bin scalars instead of min-max")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    _add_schema_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--config", help="JSON file with flag names as keys")
    p.add_argument("--model", choices=["gcn", "gin", "gat"])
    p.add_argument("--features", help="none, labels, all or keys joined by '+' (default all)")
    p.add_argument("--exclude", help="comma list of names kept out of the features")
    p.add_argument("--mode", choices=["auto", "regress", "classify"])
    p.add_argument("--seed", type=int)
    p.add_argument("--split-seed", type=int)
    p.add_argument("--ratios", help="train,val,test fractions")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, help="sampled subgraphs per epoch")
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--sampler", choices=["subgraph", "full"])
    p.add_argument("--nodes-per-batch", type=int)
    p.add_argument("--structure", choices=["constant", "degree"], help="input for the no-feature baseline")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpgkit", description="Encode labeled property graphs and train GNNs on them.")
    parser.add_argument("--version", action="version", version=f"lpgkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset counts and label fractions")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["text", "json"])

    p = sub.add_parser("encode", help="write the feature matrix and schema")
    _add_schema_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--config")
    p.add_argument("--entity", choices=["vertex", "edge"])
    p.add_argument("--include", help="comma list of label/key names (empty for none)")
    p.add_argument("--out", required=True)
    p.add_argument("--schema-out")

    p = sub.add_parser("train", help="train one model and write checkpoint plus report")
    _add_train_flags(p)
    p.add_argument("--task", required=True, choices=["node-class", "node-reg"])
    p.add_argument("--target", required=True, help="label name/pattern or property key")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("complete", help="predict a label or property for every eligible vertex")
    _add_train_flags(p)
    p.add_argument("--kind", required=True, choices=[LABEL, PROPERTY])
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("ablate", help="single and pairwise feature ablation")
    _add_train_flags(p)
    p.add_argument("--kind", required=True, choices=[LABEL, PROPERTY])
    p.add_argument("--target", required=True)
    p.add_argument("--pairs", choices=["on", "off"])
    p.add_argument("--per-label", action="store_true", default=None)
    p.add_argument("--seeds", help="comma list of seeds")
    p.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-svg", required=True)

    p = sub.add_parser("synth", help="generate a planted fixture or a miniature dataset")
    p.add_argument("--spec", help="planted fixture spec JSON")
    p.add_argument("--miniature", help=f"one of {', '.join(MINIATURES)}")
    p.add_argument("--out", required=True)
    return parser


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve_settings(args.command, args)
        settings.update({k: getattr(args, k) for k in ("task", "target", "kind") if hasattr(args, k)})
        COMMANDS[args.command](args, settings, stdout)
    except (LpgError, CliError, OSError) as exc:
        name = type(exc).__name__
        stderr.write(f"lpgkit {args.command}: {name}: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
