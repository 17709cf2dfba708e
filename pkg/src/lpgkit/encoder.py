"""LPG2vec: turn vertices and edges into fixed-width feature vectors."""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import RowMismatch, SchemaMismatch
from .graph import Edge, PropertyGraph, Vertex
from .schema import (
    BinnedScalar,
    Categorical,
    EncodingSchema,
    HashedText,
    NumericVector,
    Scalar,
    scalar_unit,
)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
STD_FLOOR = 1e-12

_TOKEN_RE = re.compile(r"[^\W_]+")


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    """Lowercased runs of letters/digits; whitespace, punctuation and ``_`` split."""
    return _TOKEN_RE.findall(text.lower())


@lru_cache(maxsize=65536)
def _bucket(token: str, dim: int) -> tuple[int, float]:
    h = fnv1a_64(token.encode("utf-8"))
    return h % dim, (-1.0 if h >> 63 else 1.0)


def _l2_normalize(block: np.ndarray) -> np.ndarray:
    norm = math.sqrt(math.fsum(float(x) * float(x) for x in block))
    if norm == 0.0:
        return block
    return block / norm


def hashed_text(texts: Sequence[str], dim: int) -> np.ndarray:
    block = np.zeros(dim)
    for text in texts:
        for tok in tokenize(text):
            idx, sign = _bucket(tok, dim)
            block[idx] += sign
    return _l2_normalize(block)


def _encode_property(spec, values: tuple) -> np.ndarray:
    width = spec.block_width
    block = np.zeros(width)
    if isinstance(spec, Categorical):
        index = {v: i for i, v in enumerate(spec.vocab)}
        for v in values:
            # (kind, value) identity: True must not hit the slot for 1
            i = index.get(v)
            if i is not None and type(spec.vocab[i]) is type(v):
                block[i] = 1.0
    elif isinstance(spec, Scalar):
        block[0] = scalar_unit(spec, math.fsum(float(v) for v in values) / len(values))
    elif isinstance(spec, BinnedScalar):
        for v in values:
            u = scalar_unit(spec, float(v))
            block[min(int(u * spec.bins), spec.bins - 1)] = 1.0
    elif isinstance(spec, NumericVector):
        mean = np.asarray(spec.mean)
        std = np.maximum(np.asarray(spec.std), STD_FLOOR)
        acc = np.zeros(width)
        for v in values:
            acc += (np.asarray(v, dtype=np.float64) - mean) / std
        block = _l2_normalize(acc / len(values))
    elif isinstance(spec, HashedText):
        block = hashed_text([str(v) for v in values], spec.dim)
    return block


def encode_entity(schema: EncodingSchema, entity: Vertex | Edge) -> np.ndarray:
    """Feature vector of length ``schema.total_dim`` for one vertex or edge."""
    kind = "edge" if isinstance(entity, Edge) else "vertex"
    if kind != schema.entity_kind:
        raise SchemaMismatch(f"schema encodes {schema.entity_kind}s, got a {kind}")
    out = np.zeros(schema.total_dim)
    for pos, lab in enumerate(schema.label_order):
        if lab in entity.labels:
            out[pos] = 1.0
    n_labels = len(schema.label_order)
    for block, spec in zip(schema.blocks[n_labels:], schema.layout_order()):
        values = entity.properties.get(spec.key)
        if values:
            out[block.start:block.stop] = _encode_property(spec, values)
    return out


@dataclass
class FeatureMatrix:
    values: np.ndarray
    ids: np.ndarray
    columns: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.ids = np.asarray(self.ids, dtype=np.uint64)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.ids):
            raise RowMismatch(f"{self.values.shape} values for {len(self.ids)} ids")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def save(self, path: str | Path) -> None:
        """Write the LPGF binary plus a ``<path>.ids`` sidecar (one id per line)."""
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(struct.pack("<4sIQQ", b"LPGF", 1, self.n, self.d))
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        Path(str(path) + ".ids").write_text("".join(f"{int(i)}\n" for i in self.ids), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureMatrix":
        raw = Path(path).read_bytes()
        header = struct.calcsize("<4sIQQ")
        magic, version, n, d = struct.unpack_from("<4sIQQ", raw)
        if magic != b"LPGF" or version != 1:
            raise ValueError(f"{path}: not an LPGF v1 file")
        values = np.frombuffer(raw, dtype="<f8", offset=header, count=n * d).reshape(n, d).copy()
        ids_path = Path(str(path) + ".ids")
        if ids_path.exists():
            ids = [int(x) for x in ids_path.read_text(encoding="utf-8").split()]
        else:
            ids = list(range(n))
        return cls(values, np.array(ids, dtype=np.uint64))


def encode_entities(schema: EncodingSchema, graph: PropertyGraph) -> FeatureMatrix:
    entities = list(graph.entities(schema.entity_kind))
    values = np.zeros((len(entities), schema.total_dim))
    for row, ent in enumerate(entities):
        values[row] = encode_entity(schema, ent)
    ids = np.array([e.id for e in entities], dtype=np.uint64)
    return FeatureMatrix(values, ids, schema.column_names())


def encode_graph(
    schema_v: EncodingSchema, schema_e: EncodingSchema | None, graph: PropertyGraph
) -> tuple[FeatureMatrix, FeatureMatrix | None]:
    """Vertex and edge feature matrices, rows in ascending entity id order."""
    if schema_v.entity_kind != "vertex":
        raise SchemaMismatch("first schema must encode vertices")
    if schema_e is not None and schema_e.entity_kind != "edge":
        raise SchemaMismatch("second schema must encode edges")
    fv = encode_entities(schema_v, graph)
    fe = encode_entities(schema_e, graph) if schema_e is not None else None
    return fv, fe


def augment_features(fm: FeatureMatrix, extra: np.ndarray, names: Sequence[str] | None = None) -> FeatureMatrix:
    """Append per-entity columns after the LPG2vec block."""
    extra = np.asarray(extra, dtype=np.float64)
    if extra.ndim == 1:
        extra = extra[:, None]
    if extra.shape[0] != fm.n:
        raise RowMismatch(f"{extra.shape[0]} extra rows for {fm.n} entities")
    if names is None:
        names = [f"extra[{i}]" for i in range(extra.shape[1])]
    return FeatureMatrix(np.hstack([fm.values, extra]), fm.ids.copy(), list(fm.columns) + list(names))


def constant_column(n: int) -> np.ndarray:
    return np.ones((n, 1))


def degree_column(graph: PropertyGraph) -> np.ndarray:
    return graph.degrees().astype(np.float64)[:, None]
