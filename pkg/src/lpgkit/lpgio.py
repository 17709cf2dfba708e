"""LPG-JSONL / CSV interchange, dataset statistics and train/val/test splits."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DanglingEndpoint,
    DuplicateId,
    EmptyClass,
    InvalidProperty,
    InvalidRatios,
    ManifestMismatch,
    ParseError,
)
from .graph import REALVEC, Edge, PropertyGraph, Vertex, sorted_names, value_kind

FORMAT_VERSION = 1
DEFAULT_RATIOS = (0.8, 0.1, 0.1)


# ---------------------------------------------------------------------------
# JSONL


def _decode_value(raw: Any) -> Any:
    if isinstance(raw, list):
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw):
            raise InvalidProperty(f"vector with non-numeric component: {raw!r}")
        return tuple(float(x) for x in raw)
    if raw is None or isinstance(raw, dict):
        raise InvalidProperty(f"unsupported value {raw!r}")
    return raw


def _decode_props(raw: Any) -> dict[str, list]:
    if not isinstance(raw, dict):
        raise InvalidProperty("props must be an object")
    out = {}
    for key, values in raw.items():
        if not isinstance(values, list):
            raise InvalidProperty(f"props[{key!r}] must be an array of values")
        out[key] = [_decode_value(v) for v in values]
    return out


def _decode_labels(raw: Any) -> list[str]:
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise InvalidProperty("labels must be an array of strings")
    if len(set(raw)) != len(raw):
        raise InvalidProperty("duplicate label")
    return raw


def _uint(raw: Any, what: str) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int) or raw < 0:
        raise InvalidProperty(f"{what} must be an unsigned integer, got {raw!r}")
    return raw


def load_lpg_jsonl(path: str | Path) -> PropertyGraph:
    """Load an LPG-JSONL file.

    All vertex records are inserted before any edge record, so the order of
    lines after the header does not matter.
    """
    vertices: list[tuple[int, Vertex]] = []
    edges: list[tuple[int, dict]] = []
    directed = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise ParseError(lineno, "record must be a JSON object")
            kind = rec.get("kind")
            if directed is None:
                if kind != "header":
                    raise ParseError(lineno, "first record must be the header")
                if rec.get("version") != FORMAT_VERSION:
                    raise ParseError(lineno, f"unsupported version {rec.get('version')!r}")
                if not isinstance(rec.get("directed"), bool):
                    raise ParseError(lineno, "header.directed must be a boolean")
                directed = rec["directed"]
                continue
            try:
                if kind == "vertex":
                    v = Vertex(
                        _uint(rec.get("id"), "id"),
                        _decode_labels(rec.get("labels", [])),
                        _decode_props(rec.get("props", {})),
                    )
                    vertices.append((lineno, v))
                elif kind == "edge":
                    e = Edge(
                        _uint(rec.get("id"), "id"),
                        _uint(rec.get("src"), "src"),
                        _uint(rec.get("dst"), "dst"),
                        _decode_labels(rec.get("labels", [])),
                        _decode_props(rec.get("props", {})),
                    )
                    edges.append((lineno, e))
                else:
                    raise InvalidProperty(f"unknown record kind {kind!r}")
            except InvalidProperty as exc:
                raise ParseError(lineno, str(exc)) from None
    if directed is None:
        raise ParseError(1, "missing header")
    graph = PropertyGraph(directed=directed)
    for lineno, v in vertices:
        try:
            graph.add_vertex(v)
        except DuplicateId as exc:
            raise DuplicateId(f"line {lineno}: {exc}") from None
    for lineno, e in edges:
        try:
            graph.add_edge(e)
        except (DuplicateId, DanglingEndpoint) as exc:
            raise type(exc)(f"line {lineno}: {exc}") from None
    return graph.freeze()


def _encode_value(value: Any) -> Any:
    if value_kind(value) == REALVEC:
        return list(value)
    return value


def _record(entity: Vertex | Edge) -> dict:
    rec: dict[str, Any] = {"id": entity.id}
    if isinstance(entity, Edge):
        rec.update(kind="edge", src=entity.src, dst=entity.dst)
    else:
        rec["kind"] = "vertex"
    rec["labels"] = sorted_names(entity.labels)
    rec["props"] = {k: [_encode_value(v) for v in vals] for k, vals in entity.properties.items()}
    return rec


def _dumps(rec: Mapping) -> str:
    # json renders floats with repr(): shortest string that round-trips
    return json.dumps(rec, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def iter_jsonl_lines(graph: PropertyGraph) -> Iterable[str]:
    yield _dumps({"kind": "header", "version": FORMAT_VERSION, "directed": graph.directed})
    for v in graph.vertices():
        yield _dumps(_record(v))
    for e in graph.edges():
        yield _dumps(_record(e))


def save_lpg_jsonl(graph: PropertyGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in iter_jsonl_lines(graph):
            fh.write(line + "\n")


def canonical_records(graph: PropertyGraph) -> tuple[str, ...]:
    """Canonical text form; two graphs are semantically equal iff these match."""
    return tuple(iter_jsonl_lines(graph))


# ---------------------------------------------------------------------------
# CSV + manifest

_SCALAR_PARSERS = {
    "prop:int": int,
    "prop:real": float,
    "prop:text": str,
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _split_sep(kind: str, prefix: str) -> str | None:
    """``labels(;)`` -> ``;``; returns None when ``kind`` lacks the prefix."""
    if not kind.startswith(prefix):
        return None
    rest = kind[len(prefix):]
    if not rest:
        return ";"
    if rest.startswith("(") and rest.endswith(")") and len(rest) == 3:
        return rest[1]
    return None


def _validate_kind(column: str, kind: str) -> None:
    if kind in ("id", "src", "dst", "prop:bool") or kind in _SCALAR_PARSERS:
        return
    if _split_sep(kind, "labels") is not None or _split_sep(kind, "prop:realvec") is not None:
        return
    raise ManifestMismatch(f"column {column!r}: unknown kind {kind!r}")


def _read_manifest(path: str | Path) -> tuple[dict[str, str], dict[str, str], bool | None]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ManifestMismatch("manifest must be a JSON object")
    directed = raw.get("directed") if isinstance(raw.get("directed"), bool) else None
    if "nodes" in raw or "edges" in raw:
        nodes, edges = raw.get("nodes", {}), raw.get("edges", {})
    else:
        flat = {k: v for k, v in raw.items() if not isinstance(v, bool)}
        nodes, edges = flat, flat
    for mapping in (nodes, edges):
        for col, kind in mapping.items():
            if not isinstance(kind, str):
                raise ManifestMismatch(f"column {col!r}: kind must be a string")
            _validate_kind(col, kind)
    return nodes, edges, directed


def _parse_row(row: dict[str, str], kinds: dict[str, str], lineno: int) -> tuple[dict, list[str], dict]:
    ident: dict[str, int] = {}
    labels: list[str] = []
    props: dict[str, list] = {}
    for col, cell in row.items():
        kind = kinds[col]
        cell = cell if cell is not None else ""
        try:
            if kind in ("id", "src", "dst"):
                ident[kind] = int(cell)
                if ident[kind] < 0:
                    raise ValueError("negative id")
            elif (sep := _split_sep(kind, "labels")) is not None:
                labels = [x for x in cell.split(sep) if x]
            elif cell == "":
                continue
            elif kind == "prop:bool":
                props[col] = [_parse_bool(cell)]
            elif (sep := _split_sep(kind, "prop:realvec")) is not None:
                props[col] = [tuple(float(x) for x in cell.split(sep))]
            else:
                props[col] = [_SCALAR_PARSERS[kind](cell)]
        except ValueError as exc:
            raise ParseError(lineno, f"column {col!r}: {exc}") from None
    return ident, labels, props


def _read_csv(path: str | Path, kinds: dict[str, str], required: Sequence[str]):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in header if c not in kinds]
        if missing:
            raise ManifestMismatch(f"{path}: columns not in manifest: {missing}")
        present = {kinds[c] for c in header}
        for req in required:
            if req not in present:
                raise ManifestMismatch(f"{path}: no column of kind {req!r}")
        for row in reader:
            if None in row:
                raise ParseError(reader.line_num, "more cells than header columns")
            yield reader.line_num, _parse_row(row, kinds, reader.line_num)


def load_lpg_csv(
    nodes_path: str | Path,
    edges_path: str | Path,
    manifest_path: str | Path,
    directed: bool | None = None,
) -> PropertyGraph:
    """Load a graph from a nodes CSV, an edges CSV and a column-kind manifest.

    Edge rows without an ``id`` column are numbered by row order.
    """
    node_kinds, edge_kinds, manifest_directed = _read_manifest(manifest_path)
    if directed is None:
        directed = bool(manifest_directed)
    graph = PropertyGraph(directed=directed)
    try:
        for lineno, (ident, labels, props) in _read_csv(nodes_path, node_kinds, ("id",)):
            graph.add_vertex(Vertex(ident["id"], labels, props))
        for row_no, (lineno, (ident, labels, props)) in enumerate(
            _read_csv(edges_path, edge_kinds, ("src", "dst"))
        ):
            eid = ident.get("id", row_no)
            graph.add_edge(Edge(eid, ident["src"], ident["dst"], labels, props))
    except InvalidProperty as exc:
        raise ParseError(lineno, str(exc)) from None
    return graph.freeze()


# ---------------------------------------------------------------------------
# statistics


@dataclass
class DatasetStats:
    n_vertices: int = 0
    n_edges: int = 0
    n_labels: int = 0
    n_property_keys: int = 0
    n_edge_labels: int = 0
    n_edge_property_keys: int = 0
    label_fractions: dict[str, float] = field(default_factory=dict)

    def as_row(self) -> dict[str, Any]:
        return {
            "vertices": self.n_vertices,
            "edges": self.n_edges,
            "labels": self.n_labels,
            "properties": self.n_property_keys,
            "edge_labels": self.n_edge_labels,
            "edge_properties": self.n_edge_property_keys,
        }


def dataset_stats(graph: PropertyGraph) -> DatasetStats:
    """Table-style counts. ``n_labels``/``n_property_keys`` count vertex-side names."""
    counts: dict[str, int] = {}
    for v in graph.vertices():
        for lab in v.labels:
            counts[lab] = counts.get(lab, 0) + 1
    n = graph.n
    return DatasetStats(
        n_vertices=n,
        n_edges=graph.m,
        n_labels=len(counts),
        n_property_keys=len(graph.key_universe("vertex")),
        n_edge_labels=len(graph.label_universe("edge")),
        n_edge_property_keys=len(graph.key_universe("edge")),
        label_fractions={lab: counts[lab] / n for lab in sorted_names(counts)},
    )


# ---------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class SplitMasks:
    train: frozenset[int]
    val: frozenset[int]
    test: frozenset[int]
    seed: int
    ratios: tuple[float, float, float]

    def as_arrays(self, graph: PropertyGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Boolean masks over vertex positions (ascending id order)."""
        out = []
        for ids in (self.train, self.val, self.test):
            mask = np.zeros(graph.n, dtype=bool)
            mask[[graph.index_of(v) for v in ids]] = True
            out.append(mask)
        return tuple(out)


def _check_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(not (r > 0) or not math.isfinite(r) for r in ratios):
        raise InvalidRatios(f"need three positive ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidRatios(f"ratios sum to {sum(ratios)!r}, not 1")
    return ratios


def _largest_remainder(total: int, ratios: Sequence[float]) -> list[int]:
    quotas = [total * r for r in ratios]
    sizes = [math.floor(q + 1e-9) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda s: (-(quotas[s] - sizes[s]), s))
    for s in order[: total - sum(sizes)]:
        sizes[s] += 1
    return sizes


def _stratified_counts(class_sizes: list[int], ratios: Sequence[float]) -> list[list[int]]:
    """Integer table close to ``n_c * r_s`` whose row and column sums are exact.

    Cells start at the floor of their quota; leftover units go to the splits
    with the largest outstanding demand (a Gale-Ryser style greedy), so every
    cell stays within one vertex of its quota.
    """
    totals = _largest_remainder(sum(class_sizes), ratios)
    quotas = [[nc * r for r in ratios] for nc in class_sizes]
    table = [[math.floor(q + 1e-9) for q in row] for row in quotas]
    demand = [totals[s] - sum(row[s] for row in table) for s in range(len(ratios))]
    spare = [nc - sum(row) for nc, row in zip(class_sizes, table)]
    for c in sorted(range(len(class_sizes)), key=lambda c: (-spare[c], c)):
        cols = sorted(
            range(len(ratios)),
            key=lambda s: (-demand[s], -(quotas[c][s] - table[c][s]), s),
        )
        for s in cols[: spare[c]]:
            table[c][s] += 1
            demand[s] -= 1
    assert all(d == 0 for d in demand), demand
    return table


def make_splits(
    graph: PropertyGraph,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    seed: int = 0,
    stratify_on: Mapping[int, Any] | None = None,
    eligible: Iterable[int] | None = None,
) -> SplitMasks:
    """Partition eligible vertex ids into train/val/test.

    ``stratify_on`` maps vertex id to class; when given, only ids present in
    it are eligible and each split receives every class in proportion.
    """
    ratios = _check_ratios(ratios)
    pool = sorted(eligible) if eligible is not None else [int(v) for v in graph.vertex_ids()]
    if stratify_on is not None:
        pool = [v for v in pool if v in stratify_on]
    rng = np.random.default_rng(seed)
    parts: list[list[int]] = [[], [], []]
    if stratify_on is None:
        shuffled = [pool[i] for i in rng.permutation(len(pool))]
        sizes = _largest_remainder(len(pool), ratios)
        parts[0] = shuffled[: sizes[0]]
        parts[1] = shuffled[sizes[0]: sizes[0] + sizes[1]]
        parts[2] = shuffled[sizes[0] + sizes[1]:]
    else:
        by_class: dict[Any, list[int]] = {}
        for v in pool:
            by_class.setdefault(stratify_on[v], []).append(v)
        classes = sorted(by_class)
        for c in classes:
            if len(by_class[c]) < len(ratios):
                raise EmptyClass(f"class {c!r} has {len(by_class[c])} members, need {len(ratios)}")
        table = _stratified_counts([len(by_class[c]) for c in classes], ratios)
        for c, counts in zip(classes, table):
            members = by_class[c]
            members = [members[i] for i in rng.permutation(len(members))]
            start = 0
            for s, k in enumerate(counts):
                parts[s].extend(members[start:start + k])
                start += k
    return SplitMasks(
        train=frozenset(parts[0]),
        val=frozenset(parts[1]),
        test=frozenset(parts[2]),
        seed=seed,
        ratios=ratios,
    )
