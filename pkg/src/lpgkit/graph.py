"""In-memory Labeled Property Graph with a CSR neighbor index.

Property values are plain Python objects. The five value kinds map to:

    Integer     -> int
    Real        -> float
    Boolean     -> bool
    Text        -> str
    RealVector  -> tuple[float, ...]

Every property key holds a tuple of values, so a key may carry several values
as long as no (key, value) pair repeats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import DanglingEndpoint, DuplicateId, FrozenGraph, InvalidProperty, UnknownVertex

UINT64_MAX = 2**64 - 1

INTEGER = "int"
REAL = "real"
BOOLEAN = "bool"
TEXT = "text"
REALVEC = "realvec"
VALUE_KINDS = (INTEGER, REAL, BOOLEAN, TEXT, REALVEC)


def value_kind(value: Any) -> str:
    # bool before int: bool is an int subclass
    if isinstance(value, bool):
        return BOOLEAN
    if isinstance(value, int):
        return INTEGER
    if isinstance(value, float):
        return REAL
    if isinstance(value, str):
        return TEXT
    if isinstance(value, tuple):
        return REALVEC
    raise InvalidProperty(f"unsupported property value {value!r} ({type(value).__name__})")


def normalize_value(value: Any) -> Any:
    """Coerce list-like vectors to tuples of floats and check finiteness."""
    if isinstance(value, (list, np.ndarray)):
        value = tuple(value)
    if isinstance(value, np.generic):
        value = value.item()
    kind = value_kind(value)
    if kind == INTEGER:
        if not -(2**63) <= value < 2**63:
            raise InvalidProperty(f"integer {value} outside signed 64-bit range")
    elif kind == REAL:
        if not math.isfinite(value):
            raise InvalidProperty(f"non-finite real {value!r}")
    elif kind == REALVEC:
        if not value:
            raise InvalidProperty("empty real vector")
        if any(isinstance(x, (bool, str, tuple, list)) for x in value):
            raise InvalidProperty(f"real vector with non-numeric component: {value!r}")
        value = tuple(float(x) for x in value)
        if not all(math.isfinite(x) for x in value):
            raise InvalidProperty("real vector with non-finite component")
    return value


def _value_identity(value: Any) -> tuple[str, Any]:
    return value_kind(value), value


def normalize_properties(props: Mapping[str, Any] | None) -> dict[str, tuple]:
    """Validate a property map.

    A list or tuple is read as a sequence of values; anything else is a
    single value. Vectors therefore nest: ``{"pos": [(0.1, 0.2)]}``. A bare
    numpy array is taken as one vector.
    """
    out: dict[str, tuple] = {}
    for key, values in (props or {}).items():
        if not isinstance(key, str):
            raise InvalidProperty(f"property key must be a string, got {key!r}")
        seq = values if isinstance(values, (list, tuple)) else [values]
        normed = tuple(normalize_value(v) for v in seq)
        seen = set()
        for v in normed:
            ident = _value_identity(v)
            if ident in seen:
                raise InvalidProperty(f"duplicate (key, value) pair ({key!r}, {v!r})")
            seen.add(ident)
        if normed:
            out[key] = normed
    return out


@dataclass(frozen=True)
class Vertex:
    id: int
    labels: frozenset[str] = frozenset()
    properties: dict[str, tuple] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _check_id(self.id)
        labels = self.labels
        if isinstance(labels, str):
            labels = (labels,)
        object.__setattr__(self, "labels", frozenset(labels))
        object.__setattr__(self, "properties", normalize_properties(self.properties))


@dataclass(frozen=True)
class Edge:
    id: int
    src: int
    dst: int
    labels: frozenset[str] = frozenset()
    properties: dict[str, tuple] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _check_id(self.id)
        _check_id(self.src)
        _check_id(self.dst)
        labels = self.labels
        if isinstance(labels, str):
            labels = (labels,)
        object.__setattr__(self, "labels", frozenset(labels))
        object.__setattr__(self, "properties", normalize_properties(self.properties))


def _check_id(ident: int) -> None:
    if isinstance(ident, bool) or not isinstance(ident, (int, np.integer)):
        raise InvalidProperty(f"id must be an unsigned integer, got {ident!r}")
    if not 0 <= int(ident) <= UINT64_MAX:
        raise InvalidProperty(f"id {ident} outside unsigned 64-bit range")


class PropertyGraph:
    """Vertices and edges with label sets and multi-valued property maps.

    The graph is mutable until :meth:`freeze`; afterwards it is read-only and
    safe to share. ``directed=False`` keeps edges as stored but exposes a
    symmetrized neighbor view.
    """

    def __init__(self, directed: bool = False):
        self.directed = directed
        self._vertices: dict[int, Vertex] = {}
        self._edges: dict[int, Edge] = {}
        self._frozen = False
        self._index: dict[int, int] | None = None
        self._ids: np.ndarray | None = None
        self._csr: tuple[np.ndarray, np.ndarray] | None = None

    # -- mutation ---------------------------------------------------------

    def add_vertex(self, vertex: Vertex) -> int:
        if self._frozen:
            raise FrozenGraph("graph is frozen")
        if vertex.id in self._vertices:
            raise DuplicateId(f"vertex id {vertex.id} already present")
        self._vertices[int(vertex.id)] = vertex
        self._invalidate()
        return vertex.id

    def add_edge(self, edge: Edge) -> int:
        if self._frozen:
            raise FrozenGraph("graph is frozen")
        if edge.id in self._edges:
            raise DuplicateId(f"edge id {edge.id} already present")
        for end in (edge.src, edge.dst):
            if end not in self._vertices:
                raise DanglingEndpoint(f"edge {edge.id} references missing vertex {end}")
        self._edges[int(edge.id)] = edge
        self._invalidate()
        return edge.id

    def freeze(self) -> "PropertyGraph":
        self._build()
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def _invalidate(self) -> None:
        self._index = None
        self._ids = None
        self._csr = None

    # -- access -----------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self._vertices)

    @property
    def m(self) -> int:
        return len(self._edges)

    def vertex(self, vid: int) -> Vertex:
        try:
            return self._vertices[vid]
        except KeyError:
            raise UnknownVertex(vid) from None

    def edge(self, eid: int) -> Edge:
        return self._edges[eid]

    def has_vertex(self, vid: int) -> bool:
        return vid in self._vertices

    def vertices(self) -> Iterator[Vertex]:
        """Vertices in ascending id order."""
        for vid in sorted(self._vertices):
            yield self._vertices[vid]

    def edges(self) -> Iterator[Edge]:
        """Edges in ascending id order."""
        for eid in sorted(self._edges):
            yield self._edges[eid]

    def entities(self, kind: str) -> Iterator[Vertex | Edge]:
        if kind == "vertex":
            return self.vertices()
        if kind == "edge":
            return self.edges()
        raise ValueError(f"unknown entity kind {kind!r}")

    def vertex_ids(self) -> np.ndarray:
        self._build()
        return self._ids

    def index_of(self, vid: int) -> int:
        """Row position of a vertex in every matrix derived from this graph."""
        self._build()
        try:
            return self._index[vid]
        except KeyError:
            raise UnknownVertex(vid) from None

    # -- adjacency --------------------------------------------------------

    def _build(self) -> None:
        if self._csr is not None:
            return
        ids = np.array(sorted(self._vertices), dtype=np.uint64)
        index = {int(v): i for i, v in enumerate(ids)}
        edges = list(self.edges())
        src = np.fromiter((index[e.src] for e in edges), dtype=np.int64, count=len(edges))
        dst = np.fromiter((index[e.dst] for e in edges), dtype=np.int64, count=len(edges))
        if not self.directed:
            loop = src == dst
            rows = np.concatenate([src, dst[~loop]])
            cols = np.concatenate([dst, src[~loop]])
        else:
            rows, cols = src, dst
        order = np.lexsort((cols, rows))
        indices = cols[order]
        counts = np.bincount(rows, minlength=len(ids))
        indptr = np.zeros(len(ids) + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        self._ids = ids
        self._index = index
        self._csr = (indptr, indices.astype(np.int64))

    def rebuild_adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        self._csr = None
        self._build()
        return self._csr

    @property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` over vertex positions, rows sorted ascending."""
        self._build()
        return self._csr

    def neighbors(self, vid: int) -> list[int]:
        i = self.index_of(vid)
        indptr, indices = self._csr
        return [int(self._ids[j]) for j in indices[indptr[i]:indptr[i + 1]]]

    def degree(self, vid: int) -> int:
        i = self.index_of(vid)
        indptr, _ = self._csr
        return int(indptr[i + 1] - indptr[i])

    def degrees(self) -> np.ndarray:
        indptr, _ = self.csr
        return np.diff(indptr)

    def adjacency_matrix(self) -> sp.csr_matrix:
        """Neighbor-count matrix; entry (i, j) is the multiplicity of j in row i."""
        indptr, indices = self.csr
        data = np.ones(len(indices), dtype=np.float64)
        mat = sp.csr_matrix((data, indices, indptr), shape=(self.n, self.n))
        mat.sum_duplicates()
        return mat

    # -- universes --------------------------------------------------------

    def label_universe(self, kind: str | None = None) -> list[str]:
        return sorted_names(_union(self._pick(kind), lambda e: e.labels))

    def key_universe(self, kind: str | None = None) -> list[str]:
        return sorted_names(_union(self._pick(kind), lambda e: e.properties.keys()))

    def _pick(self, kind: str | None) -> Iterable[Vertex | Edge]:
        if kind is None:
            return list(self._vertices.values()) + list(self._edges.values())
        return list(self.entities(kind))

    def __repr__(self) -> str:
        return f"PropertyGraph(n={self.n}, m={self.m}, directed={self.directed})"


def _union(items, getter) -> set[str]:
    out: set[str] = set()
    for item in items:
        out.update(getter(item))
    return out


def sorted_names(names: Iterable[str]) -> list[str]:
    """Sort strings by their UTF-8 bytes (locale independent)."""
    return sorted(set(names), key=lambda s: s.encode("utf-8"))
