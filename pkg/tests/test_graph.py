from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpgkit.errors import DanglingEndpoint, DuplicateId, FrozenGraph, InvalidProperty, UnknownVertex
from lpgkit.graph import Edge, PropertyGraph, Vertex, sorted_names


def path_graph(n: int, directed: bool = False) -> PropertyGraph:
    g = PropertyGraph(directed=directed)
    for i in range(n):
        g.add_vertex(Vertex(i))
    for i in range(n - 1):
        g.add_edge(Edge(i, i, i + 1))
    return g


def test_add_vertex():
    g = PropertyGraph()
    g.add_vertex(Vertex(0, {"Paper"}))
    assert g.n == 1
    assert g.vertex(0).labels == frozenset({"Paper"})


def test_duplicate_vertex_id():
    g = PropertyGraph()
    g.add_vertex(Vertex(0))
    with pytest.raises(DuplicateId):
        g.add_vertex(Vertex(0, {"Other"}))


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_real_rejected(bad):
    with pytest.raises(InvalidProperty):
        Vertex(0, (), {"score": [bad]})


def test_vector_rules():
    with pytest.raises(InvalidProperty):
        Vertex(0, (), {"pos": [[]]})
    with pytest.raises(InvalidProperty):
        Vertex(0, (), {"pos": [[1.0, math.nan]]})
    v = Vertex(0, (), {"pos": [[1, 2.5]]})
    assert v.properties["pos"] == ((1.0, 2.5),)


def test_duplicate_key_value_pair_rejected():
    with pytest.raises(InvalidProperty):
        Vertex(0, (), {"year": [2020, 2020]})
    # same number but different kinds are different values
    Vertex(0, (), {"year": [1, 1.0, True]})


def test_add_edge_and_neighbors():
    g = PropertyGraph()
    g.add_vertex(Vertex(0))
    g.add_vertex(Vertex(1))
    g.add_edge(Edge(0, 0, 1))
    assert g.m == 1
    assert g.neighbors(0) == [1]


def test_dangling_endpoint():
    g = PropertyGraph()
    g.add_vertex(Vertex(0))
    g.add_vertex(Vertex(1))
    with pytest.raises(DanglingEndpoint):
        g.add_edge(Edge(0, 0, 9))


def test_self_loop_counts_once():
    g = PropertyGraph()
    g.add_vertex(Vertex(0))
    g.add_edge(Edge(0, 0, 0))
    indptr, indices = g.csr
    # direct enumeration of the CSR row
    assert list(indices[indptr[0]:indptr[1]]) == [0]
    assert g.degree(0) == 1


def test_path_neighbors_and_isolated():
    g = path_graph(3)
    g.add_vertex(Vertex(7))
    assert g.neighbors(1) == [0, 2]
    assert g.neighbors(7) == []


def test_symmetrized_view_of_directed_edges():
    g = PropertyGraph(directed=False)
    for i in range(3):
        g.add_vertex(Vertex(i))
    g.add_edge(Edge(0, 0, 1))
    g.add_edge(Edge(1, 2, 1))
    assert g.neighbors(1) == [0, 2]
    d = PropertyGraph(directed=True)
    for i in range(3):
        d.add_vertex(Vertex(i))
    d.add_edge(Edge(0, 0, 1))
    d.add_edge(Edge(1, 2, 1))
    assert d.neighbors(1) == []
    assert d.neighbors(0) == [1]


def test_unknown_vertex():
    with pytest.raises(UnknownVertex):
        path_graph(2).neighbors(5)


def test_frozen_graph_is_read_only():
    g = path_graph(2).freeze()
    with pytest.raises(FrozenGraph):
        g.add_vertex(Vertex(9))


def test_universes():
    g = PropertyGraph()
    g.add_vertex(Vertex(0, {"Paper"}, {"year": [2020]}))
    g.add_vertex(Vertex(1, {"Author", "Paper"}, {"title": ["x"], "year": [2021]}))
    assert g.label_universe() == ["Author", "Paper"]
    assert g.key_universe() == ["title", "year"]
    assert PropertyGraph().label_universe() == []


def test_sorted_names_uses_utf8_bytes():
    # 'Z' (0x5a) < 'a' (0x61) < 'é' (0xc3 0xa9)
    assert sorted_names(["é", "a", "Z"]) == ["Z", "a", "é"]


def test_rebuild_is_idempotent():
    g = path_graph(5)
    a = [x.copy() for x in g.rebuild_adjacency()]
    b = g.rebuild_adjacency()
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


edge_lists = st.integers(1, 12).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=30),
        st.booleans(),
        st.randoms(use_true_random=False),
    )
)


def _build(n, edges, directed, order):
    g = PropertyGraph(directed=directed)
    for i in order:
        g.add_vertex(Vertex(i, {f"L{i % 3}"}, {f"k{i % 4}": [i]}))
    for eid, (a, b) in enumerate(edges):
        g.add_edge(Edge(eid, a, b))
    return g


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_degree_matches_neighbor_count_and_insertion_order(data):
    n, edges, directed, rnd = data
    g = _build(n, edges, directed, range(n))
    order = list(range(n))
    rnd.shuffle(order)
    h = _build(n, edges, directed, order)
    for v in range(n):
        assert g.degree(v) == len(g.neighbors(v))
        assert g.neighbors(v) == sorted(g.neighbors(v))
    assert all(np.array_equal(x, y) for x, y in zip(g.csr, h.csr))
    assert g.label_universe() == h.label_universe()
    assert g.key_universe() == h.key_universe()
