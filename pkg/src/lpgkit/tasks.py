"""Label and property completion tasks with a leakage guard.

A task turns part of the graph's own content into targets: which of a set of
labels a vertex carries, or the value of one property key. Everything named
by the task is removed from the encoding schema before features are built.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .encoder import FeatureMatrix, constant_column, degree_column, encode_entities
from .errors import DegenerateTarget, InvalidConfig, UnknownTarget
from .graph import BOOLEAN, INTEGER, REAL, REALVEC, TEXT, PropertyGraph, sorted_names, value_kind
from .lpgio import DEFAULT_RATIOS, SplitMasks, make_splits
from .schema import EncodingSchema, SchemaOptions, exclude_names, infer_schema, restrict_schema
from .train import CLASSIFICATION, REGRESSION

LABEL = "label"
PROPERTY = "property"
AUTO = "auto"


@dataclass(frozen=True)
class CompletionTask:
    """What to predict.

    ``kind="label"``: ``targets`` names one label (binary: present or not) or
    several sibling labels (multi-class: which one the vertex carries; only
    vertices with exactly one of them are eligible).

    ``kind="property"``: ``targets`` names one key. ``mode`` is "regress",
    "classify" or "auto" (numbers regress, text and booleans classify).
    Only vertices that have the key are eligible.

    ``exclude`` lists further names kept out of the features.
    """

    kind: str
    targets: tuple[str, ...]
    mode: str = AUTO
    exclude: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in (LABEL, PROPERTY):
            raise InvalidConfig(f"unknown task kind {self.kind!r}")
        if not self.targets:
            raise InvalidConfig("a task needs at least one target")
        if self.kind == PROPERTY and len(self.targets) != 1:
            raise InvalidConfig("property tasks take exactly one key")
        if self.mode not in (AUTO, "regress", "classify"):
            raise InvalidConfig(f"unknown mode {self.mode!r}")

    @property
    def leakage_exclusion(self) -> frozenset[str]:
        return frozenset(self.targets) | frozenset(self.exclude)

    @property
    def name(self) -> str:
        return f"{self.kind}:{'|'.join(self.targets)}"


def label_task(target: str | Sequence[str], exclude: Sequence[str] = ()) -> CompletionTask:
    targets = (target,) if isinstance(target, str) else tuple(target)
    return CompletionTask(LABEL, targets, exclude=tuple(exclude))


def property_task(key: str, mode: str = AUTO, exclude: Sequence[str] = ()) -> CompletionTask:
    return CompletionTask(PROPERTY, (key,), mode, tuple(exclude))


def resolve_label_targets(graph: PropertyGraph, pattern: str) -> tuple[str, ...]:
    """Expand a comma list of label names or shell-style patterns (``Group*``)."""
    universe = graph.label_universe("vertex")
    found: list[str] = []
    for part in (p.strip() for p in pattern.split(",")):
        if not part:
            continue
        hits = [lab for lab in universe if fnmatch.fnmatchcase(lab, part)]
        if not hits:
            raise UnknownTarget(part)
        found.extend(h for h in hits if h not in found)
    if not found:
        raise UnknownTarget(pattern)
    return tuple(sorted_names(found))


@dataclass
class TaskTargets:
    """Targets over all vertex positions; ``eligible`` marks the ones that count."""

    task: CompletionTask
    task_type: str
    values: np.ndarray
    eligible: np.ndarray
    class_names: tuple = ()

    @property
    def num_classes(self) -> int:
        return len(self.class_names) if self.task_type == CLASSIFICATION else 1


def _first_value(values: tuple):
    return sorted(values, key=lambda v: (str(type(v)), v))[0]


def extract_targets(graph: PropertyGraph, task: CompletionTask) -> TaskTargets:
    vertices = list(graph.vertices())
    n = len(vertices)
    if task.kind == LABEL:
        universe = set(graph.label_universe("vertex"))
        missing = [t for t in task.targets if t not in universe]
        if missing:
            raise UnknownTarget(", ".join(missing))
        if len(task.targets) == 1:
            (lab,) = task.targets
            values = np.array([1.0 if lab in v.labels else 0.0 for v in vertices])
            eligible = np.ones(n, dtype=bool)
            classes = (False, True)
        else:
            values = np.zeros(n)
            eligible = np.zeros(n, dtype=bool)
            for i, v in enumerate(vertices):
                hits = [c for c, lab in enumerate(task.targets) if lab in v.labels]
                if len(hits) == 1:
                    values[i] = hits[0]
                    eligible[i] = True
            classes = task.targets
        present = np.unique(values[eligible])
        if len(present) < 2:
            raise DegenerateTarget(f"{task.name} has a single class among eligible vertices")
        return TaskTargets(task, CLASSIFICATION, values, eligible, tuple(classes))

    (key,) = task.targets
    raw = [v.properties.get(key) for v in vertices]
    eligible = np.array([r is not None for r in raw])
    if not eligible.any():
        raise UnknownTarget(key)
    kinds = {value_kind(x) for r in raw if r is not None for x in r}
    if REALVEC in kinds:
        raise InvalidConfig(f"vector property {key!r} cannot be a target")
    numeric = kinds <= {INTEGER, REAL}
    mode = task.mode
    if mode == AUTO:
        mode = "regress" if numeric else "classify"
    if mode == "regress":
        if not numeric:
            raise InvalidConfig(f"property {key!r} is not numeric")
        values = np.array([float(np.mean(r)) if r is not None else 0.0 for r in raw])
        if np.ptp(values[eligible]) == 0:
            raise DegenerateTarget(f"{key!r} is constant over eligible vertices")
        return TaskTargets(task, REGRESSION, values, eligible)
    picks = [_first_value(r) if r is not None else None for r in raw]
    classes = sorted({p for p in picks if p is not None}, key=lambda v: (str(type(v)), v))
    if len(classes) < 2:
        raise DegenerateTarget(f"{key!r} takes a single value")
    index = {c: i for i, c in enumerate(classes)}
    values = np.array([index[p] if p is not None else 0 for p in picks], dtype=np.float64)
    return TaskTargets(task, CLASSIFICATION, values, eligible, tuple(classes))


@dataclass
class PreparedTask:
    """Targets, split, leakage-free schema and the encoded features of one task."""

    graph: PropertyGraph
    targets: TaskTargets
    split: SplitMasks
    schema: EncodingSchema
    features: FeatureMatrix
    masks: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)

    @property
    def task(self) -> CompletionTask:
        return self.targets.task

    def assert_no_leakage(self) -> None:
        """The schema owns no column for any excluded name."""
        for name in self.task.leakage_exclusion:
            assert name not in self.schema.names, name
            assert not self.schema.columns_of(name), name

    def feature_subset(self, names: Sequence[str], structure: str = "constant") -> np.ndarray:
        """Columns for the given label/key names; no names -> structure-only input."""
        if not names:
            if structure == "degree":
                return degree_column(self.graph)
            return constant_column(self.graph.n)
        sub = restrict_schema(self.schema, names)
        cols = [c for name in sub.names for c in self.schema.columns_of(name)]
        return self.features.values[:, sorted(cols)]


def prepare_task(
    graph: PropertyGraph,
    task: CompletionTask,
    split_seed: int = 0,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    options: SchemaOptions | None = None,
) -> PreparedTask:
    targets = extract_targets(graph, task)
    ids = graph.vertex_ids()
    eligible_ids = [int(ids[i]) for i in np.flatnonzero(targets.eligible)]
    stratify = None
    if targets.task_type == CLASSIFICATION:
        stratify = {int(ids[i]): int(targets.values[i]) for i in np.flatnonzero(targets.eligible)}
    split = make_splits(graph, ratios, split_seed, stratify_on=stratify, eligible=eligible_ids)
    full = infer_schema(graph, "vertex", options, split=split)
    schema = exclude_names(full, [name for name in task.leakage_exclusion if name in full.names])
    features = encode_entities(schema, graph)
    prepared = PreparedTask(graph, targets, split, schema, features, split.as_arrays(graph))
    prepared.assert_no_leakage()
    return prepared
