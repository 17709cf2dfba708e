"""Uplift tables and single/pairwise feature ablations over completion tasks."""

from __future__ import annotations

import csv
import io
import itertools
import os
import xml.etree.ElementTree as ET
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidConfig, UnknownName
from .gnn import ModelConfig, build_normalized_adjacency
from .gnn.adjacency import NormalizedAdjacency
from .tasks import PreparedTask
from .train import CLASSIFICATION, BatchPlan, TrainConfig, higher_is_better, summarize, train

NONE = "none"
LABELS = "labels"
ALL = "all"
NEUTRAL_TOLERANCE = 0.005


# ---------------------------------------------------------------------------
# feature configurations


def config_names(prepared: PreparedTask, config: str) -> list[str]:
    """Schema names selected by a configuration string.

    ``none`` selects nothing (structure only), ``labels`` the whole label
    group, ``all`` everything; other tokens are property keys, and tokens
    combine with ``+`` (``labels+topic``).
    """
    schema = prepared.schema
    if config == NONE:
        return []
    if config == ALL:
        return list(schema.names)
    picked: list[str] = []
    for token in config.split("+"):
        if token == LABELS:
            picked.extend(schema.label_order)
        elif token in {s.key for s in schema.property_order}:
            picked.append(token)
        else:
            raise UnknownName(token)
    return list(dict.fromkeys(picked))


# ---------------------------------------------------------------------------
# job execution


@dataclass(frozen=True)
class Job:
    """One training run; ``cell`` identifies the feature configuration."""

    cell: str
    model: str
    seed: int
    names: tuple[str, ...]


@dataclass
class RunSettings:
    train: TrainConfig = field(default_factory=TrainConfig)
    hidden: int = 64
    heads: int = 4
    structure: str = "constant"
    jobs: int = 1


def default_jobs() -> int:
    return os.cpu_count() or 1


def _train_one(adj, features, targets, masks, model_config, train_config, plan=None) -> float:
    _, report = train(adj, features, targets, masks, model_config, train_config, plan=plan)
    return report.test_metric


def _payload(prepared: PreparedTask, job: Job, settings: RunSettings):
    x = prepared.feature_subset(job.names, settings.structure)
    tt = prepared.targets
    tc = replace(settings.train, seed=job.seed, task=tt.task_type, num_classes=max(tt.num_classes, 2))
    mc = ModelConfig(job.model, x.shape[1], tc.out_dim, settings.hidden, settings.heads, seed=job.seed)
    return x, tt.values, prepared.masks, mc, tc


def _run_pooled(args) -> float:
    matrix, payload = args
    return _train_one(NormalizedAdjacency.from_matrix(matrix), *payload)


def run_jobs(prepared: PreparedTask, jobs: Sequence[Job], settings: RunSettings) -> dict[tuple[str, str, int], float]:
    """Test metric per (cell, model, seed).

    With one worker, runs of the same seed share their sampled batches.
    With several, each job runs in its own process; results are identical.
    """
    adj = build_normalized_adjacency(prepared.graph)
    results: dict[tuple[str, str, int], float] = {}
    if settings.jobs <= 1 or len(jobs) <= 1:
        plans: dict[int, BatchPlan] = {}
        for job in sorted(jobs, key=lambda j: j.seed):
            payload = _payload(prepared, job, settings)
            tc = payload[-1]
            if job.seed not in plans:
                plans = {job.seed: BatchPlan(adj, tc, keep=True)}
            results[(job.cell, job.model, job.seed)] = _train_one(adj, *payload, plan=plans[job.seed])
        return results
    matrix = prepared.graph.adjacency_matrix()
    args = [(matrix, _payload(prepared, job, settings)) for job in jobs]
    with ProcessPoolExecutor(max_workers=settings.jobs) as pool:
        for job, metric in zip(jobs, pool.map(_run_pooled, args)):
            results[(job.cell, job.model, job.seed)] = metric
    return results


# ---------------------------------------------------------------------------
# uplift


@dataclass
class UpliftTable:
    task: str
    metric: str
    rows: list[tuple[str, str, int, float]]  # model, config, seed, test metric

    def summary(self) -> dict[tuple[str, str], tuple[float, float]]:
        grouped: dict[tuple[str, str], list[float]] = {}
        for model, config, _, value in self.rows:
            grouped.setdefault((model, config), []).append(value)
        return {k: summarize(v) for k, v in grouped.items()}

    def mean(self, model: str, config: str) -> float:
        return self.summary()[(model, config)][0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task", "model", "config", "seed", self.metric])
        for model, config, seed, value in self.rows:
            w.writerow([self.task, model, config, seed, repr(value)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["task", "model", "config", "mean", "std"])
        for (model, config), (mean, std) in self.summary().items():
            w.writerow([self.task, model, config, repr(mean), repr(std)])
        return buf.getvalue()


def run_uplift_experiment(
    prepared: PreparedTask,
    models: Sequence[str],
    configs: Sequence[str],
    seeds: Sequence[int],
    settings: RunSettings | None = None,
) -> UpliftTable:
    settings = settings or RunSettings()
    jobs = [
        Job(config, model, seed, tuple(config_names(prepared, config)))
        for model in models
        for config in configs
        for seed in seeds
    ]
    results = run_jobs(prepared, jobs, settings)
    rows = [(j.model, j.cell, j.seed, results[(j.cell, j.model, j.seed)]) for j in jobs]
    metric = "accuracy" if prepared.targets.task_type == CLASSIFICATION else "mae"
    return UpliftTable(prepared.task.name, metric, rows)


# ---------------------------------------------------------------------------
# pairwise ablation


def _pair_cell(a: str, b: str) -> str:
    return f"{a}+{b}"


@dataclass
class AblationReport:
    """Per-cell mean/std over seeds and deltas against the structure-only baseline.

    Deltas are improvements: positive is better, also for MAE.
    """

    task: str
    model: str
    metric: str
    keys: tuple[str, ...]
    cells: dict[str, tuple[float, float]]
    per_seed: dict[str, list[float]] = field(repr=False, default_factory=dict)

    @property
    def baseline(self) -> float:
        return self.cells[NONE][0]

    def delta(self, cell: str) -> float:
        diff = self.cells[cell][0] - self.baseline
        # + 0.0 turns -0.0 into 0.0 so the CSV never shows a signed zero
        return (diff if self.metric == "accuracy" else -diff) + 0.0

    def single(self, key: str) -> float:
        return self.cells[key][0]

    def pair(self, a: str, b: str) -> float:
        if a == b:
            return self.single(a)
        lo, hi = sorted((a, b), key=self.keys.index)
        return self.cells[_pair_cell(lo, hi)][0]

    def has_pairs(self) -> bool:
        return len(self.keys) > 1 and _pair_cell(*self.keys[:2]) in self.cells

    def matrix(self) -> np.ndarray:
        """Symmetric key x key metric matrix; the diagonal holds single-key runs."""
        k = len(self.keys)
        out = np.full((k, k), np.nan)
        for i, j in itertools.product(range(k), repeat=2):
            if i == j or self.has_pairs():
                out[i, j] = self.pair(self.keys[i], self.keys[j])
        return out

    def delta_matrix(self) -> np.ndarray:
        m = self.matrix() - self.baseline
        return m if self.metric == "accuracy" else -m

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "mean", "std", "delta"])
        for cell, (mean, std) in self.cells.items():
            w.writerow([cell, repr(mean), repr(std), repr(self.delta(cell))])
        return buf.getvalue()


def run_pairwise_ablation(
    prepared: PreparedTask,
    model: str,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    settings: RunSettings | None = None,
    pairs: bool = True,
    per_label: bool = False,
) -> AblationReport:
    """Baseline, the label group, every property key and every unordered key pair.

    The task's split stays fixed; ``seeds`` vary initialization and sampling.
    """
    settings = settings or RunSettings()
    schema = prepared.schema
    keys = tuple(s.key for s in schema.property_order)
    if len(keys) < 2 and pairs:
        raise InvalidConfig("pairwise ablation needs at least two property keys")
    cells: list[tuple[str, tuple[str, ...]]] = [(NONE, ())]
    if schema.label_order:
        if per_label:
            cells += [(f"label:{lab}", (lab,)) for lab in schema.label_order]
        else:
            cells.append((LABELS, tuple(schema.label_order)))
    cells += [(k, (k,)) for k in keys]
    if pairs:
        cells += [(_pair_cell(a, b), (a, b)) for a, b in itertools.combinations(keys, 2)]
    jobs = [Job(cell, model, seed, names) for cell, names in cells for seed in seeds]
    results = run_jobs(prepared, jobs, settings)
    per_seed = {cell: [results[(cell, model, s)] for s in seeds] for cell, _ in cells}
    summary = {cell: summarize(vals) for cell, vals in per_seed.items()}
    metric = "accuracy" if higher_is_better(prepared.targets.task_type) else "mae"
    return AblationReport(prepared.task.name, model, metric, keys, summary, per_seed)


# ---------------------------------------------------------------------------
# heatmap


def cell_color(delta: float, scale: float, tolerance: float = NEUTRAL_TOLERANCE) -> str:
    """Green for improvements, red for regressions, grey within ``tolerance``."""
    if not np.isfinite(delta):
        return "#ffffff"
    if abs(delta) < tolerance:
        return "#e0e0e0"
    strength = min(abs(delta) / scale, 1.0) if scale > 0 else 1.0
    fade = round(235 - 150 * strength)
    if delta > 0:
        return f"#{fade:02x}{235 - round(70 * strength):02x}{fade:02x}"
    return f"#{235 - round(70 * strength):02x}{fade:02x}{fade:02x}"


def render_heatmap(report: AblationReport, path: str | Path | None = None, tolerance: float = NEUTRAL_TOLERANCE) -> str:
    """SVG grid of deltas vs the baseline; a top strip holds the non-key singles."""
    cell, margin = 64, 110
    keys = list(report.keys)
    pair_cells = {_pair_cell(a, b) for a, b in itertools.combinations(keys, 2)}
    extra = [c for c in report.cells if c != NONE and c not in keys and c not in pair_cells]
    deltas = report.delta_matrix()
    finite = [abs(report.delta(c)) for c in report.cells if c != NONE]
    scale = max(finite) if finite else 1.0
    width = margin + cell * max(len(keys), len(extra), 1) + 20
    strip = cell if extra else 0
    height = margin + strip + cell * len(keys) + 40

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width), height=str(height),
                     viewBox=f"0 0 {width} {height}")
    title = ET.SubElement(svg, "text", x="10", y="20", attrib={"font-size": "13", "font-family": "sans-serif"})
    title.text = f"{report.task} / {report.model}: {report.metric} delta vs baseline {report.baseline:.4f}"

    def box(x: float, y: float, delta: float, label: str) -> None:
        ET.SubElement(svg, "rect", x=str(x), y=str(y), width=str(cell), height=str(cell),
                      fill=cell_color(delta, scale, tolerance), stroke="#ffffff")
        t = ET.SubElement(svg, "text", x=str(x + cell / 2), y=str(y + cell / 2 + 4),
                          attrib={"text-anchor": "middle", "font-size": "11", "font-family": "sans-serif"})
        t.text = label

    y0 = margin
    for i, name in enumerate(extra):
        d = report.delta(name)
        box(margin + i * cell, y0 - cell / 2, d, f"{100 * d:+.1f}")
        lab = ET.SubElement(svg, "text", x=str(margin + i * cell + cell / 2), y=str(y0 - cell / 2 - 4),
                            attrib={"text-anchor": "middle", "font-size": "10", "font-family": "sans-serif"})
        lab.text = name
    grid_y = y0 + strip
    for i, key in enumerate(keys):
        row = ET.SubElement(svg, "text", x=str(margin - 6), y=str(grid_y + i * cell + cell / 2 + 4),
                            attrib={"text-anchor": "end", "font-size": "11", "font-family": "sans-serif"})
        row.text = key
        col = ET.SubElement(svg, "text", x=str(margin + i * cell + cell / 2), y=str(grid_y + len(keys) * cell + 16),
                            attrib={"text-anchor": "middle", "font-size": "11", "font-family": "sans-serif"})
        col.text = key
        for j in range(len(keys)):
            d = deltas[i, j]
            box(margin + j * cell, grid_y + i * cell, d, "" if not np.isfinite(d) else f"{100 * d:+.1f}")
    text = ET.tostring(svg, encoding="unicode")
    text = '<?xml version="1.0" encoding="UTF-8"?>\n' + text + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def write_report(report: AblationReport, csv_path: str | Path, svg_path: str | Path) -> None:
    Path(csv_path).write_text(report.to_csv(), encoding="utf-8")
    render_heatmap(report, svg_path)


def parse_configs(text: str | Iterable[str]) -> list[str]:
    items = text.split(",") if isinstance(text, str) else list(text)
    return [c.strip() for c in items if c.strip()]
