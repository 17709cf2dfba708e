from __future__ import annotations

import json
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpgkit.errors import DanglingEndpoint, DuplicateId, EmptyClass, InvalidRatios, ManifestMismatch, ParseError
from lpgkit.graph import Edge, PropertyGraph, Vertex
from lpgkit.lpgio import (
    canonical_records,
    dataset_stats,
    load_lpg_csv,
    load_lpg_jsonl,
    make_splits,
    save_lpg_jsonl,
)
from lpgkit.miniatures import citations_miniature

HEADER = '{"kind":"header","version":1,"directed":false}'


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_three_line_file(tmp_path):
    f = write_lines(tmp_path / "g.jsonl", [
        HEADER,
        '{"kind":"vertex","id":0,"labels":["A"],"props":{}}',
        '{"kind":"vertex","id":1,"labels":[],"props":{}}',
        '{"kind":"edge","id":0,"src":0,"dst":1,"labels":[],"props":{}}',
    ])
    g = load_lpg_jsonl(f)
    assert (g.n, g.m) == (2, 1)


def test_edge_before_endpoints(tmp_path):
    lines = [
        '{"kind":"edge","id":0,"src":0,"dst":1,"labels":["E"],"props":{"w":[1.5]}}',
        '{"kind":"vertex","id":1,"labels":["B"],"props":{"x":[1]}}',
        '{"kind":"vertex","id":0,"labels":["A"],"props":{"y":["t"]}}',
    ]
    a = load_lpg_jsonl(write_lines(tmp_path / "a.jsonl", [HEADER] + lines))
    b = load_lpg_jsonl(write_lines(tmp_path / "b.jsonl", [HEADER] + sorted(lines, key=lambda s: "edge" in s)))
    assert canonical_records(a) == canonical_records(b)


def test_self_describing_boolean(tmp_path):
    f = write_lines(tmp_path / "g.jsonl", [HEADER, '{"kind":"vertex","id":0,"labels":[],"props":{"year":[true]}}'])
    assert load_lpg_jsonl(f).vertex(0).properties["year"] == (True,)


@pytest.mark.parametrize("line, exc", [
    ("not json", ParseError),
    ('{"kind":"vertex","id":-1}', ParseError),
    ('{"kind":"vertex","id":0,"props":{"a":1}}', ParseError),
    ('{"kind":"blob","id":0}', ParseError),
    ('{"kind":"edge","id":0,"src":0,"dst":5}', DanglingEndpoint),
])
def test_load_errors(tmp_path, line, exc):
    f = write_lines(tmp_path / "g.jsonl", [HEADER, '{"kind":"vertex","id":0}', line])
    with pytest.raises(exc):
        load_lpg_jsonl(f)


def test_parse_error_reports_line(tmp_path):
    f = write_lines(tmp_path / "g.jsonl", [HEADER, '{"kind":"vertex","id":0}', "{broken"])
    with pytest.raises(ParseError) as info:
        load_lpg_jsonl(f)
    assert info.value.line == 3


def test_duplicate_id_in_file(tmp_path):
    f = write_lines(tmp_path / "g.jsonl", [HEADER, '{"kind":"vertex","id":0}', '{"kind":"vertex","id":0}'])
    with pytest.raises(DuplicateId):
        load_lpg_jsonl(f)


def test_missing_header(tmp_path):
    with pytest.raises(ParseError):
        load_lpg_jsonl(write_lines(tmp_path / "g.jsonl", ['{"kind":"vertex","id":0}']))


def _csv_fixture(tmp_path, edge_dst=1):
    (tmp_path / "nodes.csv").write_text(
        "id,labels,year,pos,ok,title\n"
        "0,Paper;JournalPaper,2020,1;2,true,graph\n"
        "1,Author,,,false,\n", encoding="utf-8")
    (tmp_path / "edges.csv").write_text(f"src,dst,labels,w\n0,{edge_dst},WROTE,0.5\n", encoding="utf-8")
    manifest = {
        "directed": True,
        "nodes": {"id": "id", "labels": "labels(;)", "year": "prop:int", "pos": "prop:realvec(;)",
                  "ok": "prop:bool", "title": "prop:text"},
        "edges": {"src": "src", "dst": "dst", "labels": "labels", "w": "prop:real"},
    }
    (tmp_path / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
    return tmp_path / "nodes.csv", tmp_path / "edges.csv", tmp_path / "manifest.json"


def test_csv_labels_and_kinds(tmp_path):
    g = load_lpg_csv(*_csv_fixture(tmp_path))
    v = g.vertex(0)
    assert v.labels == frozenset({"Paper", "JournalPaper"})
    assert v.properties == {"year": (2020,), "pos": ((1.0, 2.0),), "ok": (True,), "title": ("graph",)}
    assert "year" not in g.vertex(1).properties
    assert g.edge(0).properties["w"] == (0.5,)


def test_csv_dangling(tmp_path):
    with pytest.raises(DanglingEndpoint):
        load_lpg_csv(*_csv_fixture(tmp_path, edge_dst=9))


def test_csv_manifest_mismatch(tmp_path):
    nodes, edges, manifest = _csv_fixture(tmp_path)
    nodes.write_text("id,extra\n0,1\n", encoding="utf-8")
    with pytest.raises(ManifestMismatch):
        load_lpg_csv(nodes, edges, manifest)


def test_csv_round_trip_through_jsonl(tmp_path):
    g = load_lpg_csv(*_csv_fixture(tmp_path))
    save_lpg_jsonl(g, tmp_path / "g.jsonl")
    h = load_lpg_jsonl(tmp_path / "g.jsonl")
    assert canonical_records(g) == canonical_records(h)
    assert dataset_stats(g) == dataset_stats(h)


def test_stats_citations_miniature():
    stats = dataset_stats(citations_miniature())
    assert stats.n_labels == 3
    assert set(stats.label_fractions) == {"author", "article", "venue"}


def test_stats_empty_graph():
    stats = dataset_stats(PropertyGraph())
    assert stats.as_row() == {k: 0 for k in stats.as_row()}
    assert stats.label_fractions == {}


def test_stats_fraction():
    g = PropertyGraph()
    for i in range(10):
        g.add_vertex(Vertex(i, {"author"} if i < 6 else set()))
    assert dataset_stats(g).label_fractions["author"] == 0.6


def _plain(n):
    g = PropertyGraph()
    for i in range(n):
        g.add_vertex(Vertex(i))
    return g


def test_split_sizes_and_determinism():
    g = _plain(100)
    a = make_splits(g, (0.8, 0.1, 0.1), seed=7)
    assert (len(a.train), len(a.val), len(a.test)) == (80, 10, 10)
    assert a == make_splits(g, (0.8, 0.1, 0.1), seed=7)
    assert a.train | a.val | a.test == set(range(100))


@pytest.mark.parametrize("ratios", [(0.5, 0.5), (0.8, 0.1, 0.2), (1.0, 0.0, 0.0), (-0.1, 0.6, 0.5)])
def test_invalid_ratios(ratios):
    with pytest.raises(InvalidRatios):
        make_splits(_plain(10), ratios)


def test_empty_class():
    with pytest.raises(EmptyClass):
        make_splits(_plain(10), stratify_on={i: int(i == 0) for i in range(10)})


def test_stratified_histograms_on_planted_fixture():
    from lpgkit.synth import PlantedSpec, generate

    g, classes, _ = generate(PlantedSpec())
    strat = {i: int(c) for i, c in enumerate(classes)}
    split = make_splits(g, (0.8, 0.1, 0.1), seed=3, stratify_on=strat)
    overall = Counter(strat.values())
    for part, r in zip((split.train, split.val, split.test), (0.8, 0.1, 0.1)):
        hist = Counter(strat[v] for v in part)
        for c, total in overall.items():
            assert abs(hist[c] - total * r) <= 1


@settings(max_examples=50, deadline=None)
@given(
    st.integers(3, 200),
    st.integers(0, 2**32),
    st.lists(st.floats(0.05, 1.0), min_size=3, max_size=3),
    st.integers(2, 5),
)
def test_stratified_split_properties(n, seed, raw, k):
    ratios = tuple(r / sum(raw) for r in raw)
    ratios = (ratios[0], ratios[1], 1.0 - ratios[0] - ratios[1])
    rng = random.Random(seed)
    labels = {i: rng.randrange(k) for i in range(n)}
    sizes = Counter(labels.values())
    if min(sizes.values()) < 3:
        return
    split = make_splits(_plain(n), ratios, seed, stratify_on=labels)
    parts = (split.train, split.val, split.test)
    assert sum(map(len, parts)) == n
    assert not (split.train & split.val or split.train & split.test or split.val & split.test)
    for part, r in zip(parts, ratios):
        hist = Counter(labels[v] for v in part)
        for c, total in sizes.items():
            assert abs(hist[c] - total * r) <= 1 + 1e-9


values = st.one_of(
    st.integers(-(2**63), 2**63 - 1),
    st.floats(allow_nan=False, allow_infinity=False),
    st.booleans(),
    st.text(max_size=8),
    st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=4).map(tuple),
)
prop_maps = st.dictionaries(st.text(min_size=1, max_size=5), st.lists(values, min_size=1, max_size=3), max_size=4)


def _dedupe(props):
    out = {}
    for k, vals in props.items():
        seen, keep = set(), []
        for v in vals:
            ident = (type(v).__name__, repr(v))
            if ident not in seen:
                seen.add(ident)
                keep.append(v)
        out[k] = keep
    return out


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.tuples(st.frozensets(st.text(min_size=1, max_size=4), max_size=3), prop_maps), min_size=1, max_size=6),
    st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5), prop_maps), max_size=6),
    st.booleans(),
)
def test_jsonl_round_trip_property(tmp_path_factory, vertices, edges, directed):
    g = PropertyGraph(directed=directed)
    for i, (labels, props) in enumerate(vertices):
        g.add_vertex(Vertex(i, labels, _dedupe(props)))
    for eid, (a, b, props) in enumerate(edges):
        if a < g.n and b < g.n:
            g.add_edge(Edge(eid, a, b, (), _dedupe(props)))
    path = tmp_path_factory.mktemp("rt") / "g.jsonl"
    save_lpg_jsonl(g, path)
    first = path.read_bytes()
    h = load_lpg_jsonl(path)
    assert canonical_records(h) == canonical_records(g)
    save_lpg_jsonl(h, path)
    assert path.read_bytes() == first
