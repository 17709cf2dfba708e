"""Inference of the frozen encoding schema: block order, kinds and statistics."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence, Union

import numpy as np

from .errors import EmptyGraph, MixedKinds, RaggedVector, UnknownName
from .graph import BOOLEAN, INTEGER, REAL, REALVEC, TEXT, PropertyGraph, sorted_names, value_kind

HASH_ID = "fnv1a64"


@dataclass(frozen=True)
class Categorical:
    key: str
    vocab: tuple

    @property
    def block_width(self) -> int:
        return len(self.vocab)


@dataclass(frozen=True)
class Scalar:
    key: str
    min: float
    max: float

    @property
    def block_width(self) -> int:
        return 1


@dataclass(frozen=True)
class BinnedScalar:
    """Continuous scalar discretized into ``bins`` equal-width one-hot bins."""

    key: str
    min: float
    max: float
    bins: int

    @property
    def block_width(self) -> int:
        return self.bins


@dataclass(frozen=True)
class NumericVector:
    key: str
    mean: tuple[float, ...]
    std: tuple[float, ...]

    @property
    def block_width(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class HashedText:
    key: str
    dim: int
    hash_id: str = HASH_ID

    @property
    def block_width(self) -> int:
        return self.dim


PropertyEncoderSpec = Union[Categorical, Scalar, BinnedScalar, NumericVector, HashedText]

_KIND_NAMES = {
    Categorical: "categorical",
    Scalar: "scalar",
    BinnedScalar: "binned",
    NumericVector: "vector",
    HashedText: "text",
}


@dataclass(frozen=True)
class Block:
    name: str
    kind: str  # "label" or the property encoder kind
    start: int
    width: int

    @property
    def stop(self) -> int:
        return self.start + self.width


@dataclass(frozen=True)
class EncodingSchema:
    entity_kind: str
    label_order: tuple[str, ...]
    property_order: tuple[PropertyEncoderSpec, ...]
    appendix_layout: bool = False
    blocks: tuple[Block, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        blocks = []
        pos = 0
        for lab in self.label_order:
            blocks.append(Block(lab, "label", pos, 1))
            pos += 1
        for spec in self.layout_order():
            blocks.append(Block(spec.key, _KIND_NAMES[type(spec)], pos, spec.block_width))
            pos += spec.block_width
        object.__setattr__(self, "blocks", tuple(blocks))

    def layout_order(self) -> list[PropertyEncoderSpec]:
        """Property blocks in column order.

        Key order by default; the appendix layout moves text blocks last.
        """
        specs = list(self.property_order)
        if self.appendix_layout:
            specs = [s for s in specs if not isinstance(s, HashedText)] + [
                s for s in specs if isinstance(s, HashedText)
            ]
        return specs

    @property
    def total_dim(self) -> int:
        return self.blocks[-1].stop if self.blocks else 0

    @property
    def names(self) -> list[str]:
        return list(self.label_order) + [s.key for s in self.property_order]

    def property(self, key: str) -> PropertyEncoderSpec:
        for spec in self.property_order:
            if spec.key == key:
                return spec
        raise UnknownName(key)

    def columns_of(self, name: str) -> list[int]:
        """All column indices owned by a label or property named ``name``."""
        cols: list[int] = []
        for b in self.blocks:
            if b.name == name:
                cols.extend(range(b.start, b.stop))
        return cols

    def column_names(self) -> list[str]:
        out = []
        for b in self.blocks:
            if b.kind == "label":
                out.append(f"label:{b.name}")
            else:
                out.extend(f"{b.kind}:{b.name}[{i}]" for i in range(b.width))
        return out

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        props = []
        for spec in self.property_order:
            rec: dict[str, Any] = {"key": spec.key, "kind": _KIND_NAMES[type(spec)]}
            if isinstance(spec, Categorical):
                rec["vocab"] = [list(v) if isinstance(v, tuple) else v for v in spec.vocab]
            elif isinstance(spec, Scalar):
                rec.update(min=spec.min, max=spec.max)
            elif isinstance(spec, BinnedScalar):
                rec.update(min=spec.min, max=spec.max, bins=spec.bins)
            elif isinstance(spec, NumericVector):
                rec.update(mean=list(spec.mean), std=list(spec.std))
            else:
                rec.update(dim=spec.dim, hash=spec.hash_id)
            rec["block_width"] = spec.block_width
            props.append(rec)
        return {
            "entity_kind": self.entity_kind,
            "labels": list(self.label_order),
            "properties": props,
            "appendix_layout": self.appendix_layout,
            "total_dim": self.total_dim,
            "offsets": [[b.name, b.kind, b.start, b.width] for b in self.blocks],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1, ensure_ascii=False)

    def digest(self) -> str:
        canonical = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "EncodingSchema":
        specs: list[PropertyEncoderSpec] = []
        for rec in doc["properties"]:
            kind = rec["kind"]
            if kind == "categorical":
                specs.append(Categorical(rec["key"], tuple(rec["vocab"])))
            elif kind == "scalar":
                specs.append(Scalar(rec["key"], float(rec["min"]), float(rec["max"])))
            elif kind == "binned":
                specs.append(BinnedScalar(rec["key"], float(rec["min"]), float(rec["max"]), int(rec["bins"])))
            elif kind == "vector":
                specs.append(NumericVector(rec["key"], tuple(rec["mean"]), tuple(rec["std"])))
            elif kind == "text":
                specs.append(HashedText(rec["key"], int(rec["dim"]), rec.get("hash", HASH_ID)))
            else:
                raise ValueError(f"unknown encoder kind {kind!r}")
        return cls(doc["entity_kind"], tuple(doc["labels"]), tuple(specs), bool(doc.get("appendix_layout", False)))

    @classmethod
    def loads(cls, text: str) -> "EncodingSchema":
        return cls.from_json(json.loads(text))


@dataclass(frozen=True)
class SchemaOptions:
    categorical_threshold: int = 32
    text_dim: int = 64
    integers_as_categorical: bool = False
    coerce: bool = False
    discretize_scalars: bool = False
    bins: int = 10
    appendix_layout: bool = False


def _vocab_sort_key(value: Any):
    if isinstance(value, str):
        return value.encode("utf-8")
    return value


def _resolve(key: str, values: list, stat_values: list, options: SchemaOptions) -> PropertyEncoderSpec:
    kinds = {value_kind(v) for v in values}
    if kinds == {INTEGER, REAL}:
        if not options.coerce:
            raise MixedKinds(key)
        values = [float(v) for v in values]
        stat_values = [float(v) for v in stat_values]
        kinds = {REAL}
    if len(kinds) != 1:
        raise MixedKinds(key)
    (kind,) = kinds
    distinct = sorted(set(values), key=_vocab_sort_key)
    if kind == BOOLEAN:
        return Categorical(key, tuple(distinct))
    if kind == TEXT:
        if len(distinct) <= options.categorical_threshold:
            return Categorical(key, tuple(distinct))
        return HashedText(key, options.text_dim)
    if kind == INTEGER and options.integers_as_categorical and len(distinct) <= options.categorical_threshold:
        return Categorical(key, tuple(distinct))
    if kind in (INTEGER, REAL):
        lo, hi = float(min(stat_values)), float(max(stat_values))
        if options.discretize_scalars:
            return BinnedScalar(key, lo, hi, options.bins)
        return Scalar(key, lo, hi)
    dims = {len(v) for v in values}
    if len(dims) != 1:
        raise RaggedVector(key)
    mat = np.array(stat_values, dtype=np.float64)
    # fixed summation order keeps the statistics bit-stable
    mean = mat.mean(axis=0)
    std = np.sqrt(((mat - mean) ** 2).mean(axis=0))
    return NumericVector(key, tuple(float(x) for x in mean), tuple(float(x) for x in std))


def infer_schema(
    graph: PropertyGraph,
    entity_kind: str = "vertex",
    options: SchemaOptions | None = None,
    split=None,
) -> EncodingSchema:
    """Build the schema for vertices or edges of ``graph``.

    With ``split`` (a SplitMasks), scalar ranges and vector moments use only
    training-split vertices; vocabularies and kinds always use the full graph.
    """
    options = options or SchemaOptions()
    entities = list(graph.entities(entity_kind))
    if not entities:
        raise EmptyGraph(f"graph has no {entity_kind}s")
    train = split.train if (split is not None and entity_kind == "vertex") else None
    labels = sorted_names(lab for e in entities for lab in e.labels)
    values: dict[str, list] = {}
    stat_values: dict[str, list] = {}
    for e in entities:
        for key, vals in e.properties.items():
            values.setdefault(key, []).extend(vals)
            if train is None or e.id in train:
                stat_values.setdefault(key, []).extend(vals)
    specs = []
    for key in sorted_names(values):
        stats = stat_values.get(key) or values[key]
        specs.append(_resolve(key, values[key], stats, options))
    return EncodingSchema(entity_kind, tuple(labels), tuple(specs), options.appendix_layout)


def restrict_schema(schema: EncodingSchema, include: Iterable[str]) -> EncodingSchema:
    """Keep only blocks whose label/key name is in ``include``."""
    include = set(include)
    known = set(schema.names)
    unknown = include - known
    if unknown:
        raise UnknownName(", ".join(sorted_names(unknown)))
    return replace(
        schema,
        label_order=tuple(l for l in schema.label_order if l in include),
        property_order=tuple(s for s in schema.property_order if s.key in include),
    )


def exclude_names(schema: EncodingSchema, names: Sequence[str]) -> EncodingSchema:
    drop = set(names)
    return restrict_schema(schema, [n for n in schema.names if n not in drop])


def scalar_unit(spec: Scalar | BinnedScalar, value: float) -> float:
    """Map a raw value onto [0, 1] with the frozen range; degenerate range -> 0.5."""
    span = spec.max - spec.min
    if span <= 0 or not math.isfinite(span):
        return 0.5
    return min(max((value - spec.min) / span, 0.0), 1.0)
