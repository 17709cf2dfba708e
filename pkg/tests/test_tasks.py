from __future__ import annotations

import numpy as np
import pytest

from lpgkit.errors import DegenerateTarget, InvalidConfig, UnknownTarget
from lpgkit.graph import PropertyGraph, Vertex
from lpgkit.miniatures import citations_miniature, makg_miniature
from lpgkit.synth import PlantedSpec, generate
from lpgkit.tasks import (
    CompletionTask,
    extract_targets,
    label_task,
    prepare_task,
    property_task,
    resolve_label_targets,
)
from lpgkit.train import CLASSIFICATION, REGRESSION


@pytest.fixture(scope="module")
def planted():
    return generate(PlantedSpec(n=200, seed=1))


def _labelled(n_pos=4, n=10):
    g = PropertyGraph()
    for i in range(n):
        g.add_vertex(Vertex(i, {"Person", "Admin"} if i < n_pos else {"Person"}, {"age": [20 + i], "nick": [f"n{i % 3}"]}))
    return g.freeze()


def test_binary_label_targets():
    t = extract_targets(_labelled(), label_task("Admin"))
    assert t.task_type == CLASSIFICATION
    assert t.values.mean() == pytest.approx(0.4)
    assert t.eligible.all()
    assert t.num_classes == 2


def test_multiclass_label_eligibility():
    g = PropertyGraph()
    g.add_vertex(Vertex(0, {"A"}))
    g.add_vertex(Vertex(1, {"B"}))
    g.add_vertex(Vertex(2, {"A", "B"}))
    g.add_vertex(Vertex(3, ()))
    t = extract_targets(g, label_task(["A", "B"]))
    assert t.eligible.tolist() == [True, True, False, False]
    assert t.values[:2].tolist() == [0.0, 1.0]


def test_property_eligibility_on_citations():
    g = citations_miniature()
    t = extract_targets(g, property_task("ncitations"))
    assert t.task_type == REGRESSION
    expected = [v.properties.get("ncitations") is not None for v in g.vertices()]
    assert t.eligible.tolist() == expected
    assert 0 < t.eligible.sum() < g.n


def test_auto_mode_and_first_value_rule():
    g = PropertyGraph()
    g.add_vertex(Vertex(0, (), {"tag": ["b", "a"]}))
    g.add_vertex(Vertex(1, (), {"tag": ["c"]}))
    t = extract_targets(g, property_task("tag"))
    assert t.task_type == CLASSIFICATION
    assert t.class_names == ("a", "c")
    assert t.values.tolist() == [0.0, 1.0]


def test_target_errors():
    g = _labelled()
    with pytest.raises(UnknownTarget):
        extract_targets(g, label_task("Robot"))
    with pytest.raises(DegenerateTarget):
        extract_targets(g, label_task("Person"))
    with pytest.raises(InvalidConfig):
        extract_targets(g, property_task("nick", mode="regress"))
    with pytest.raises(InvalidConfig):
        CompletionTask("property", ("a", "b"))
    with pytest.raises(InvalidConfig):
        CompletionTask("edge", ("a",))
    vec = makg_miniature()
    with pytest.raises(InvalidConfig):
        extract_targets(vec, property_task("fieldscores"))


def test_resolve_label_patterns(planted):
    g, _, _ = planted
    assert resolve_label_targets(g, "Group*") == ("Group0", "Group1", "Group2", "Group3")
    assert resolve_label_targets(g, "Flagged,Group1") == ("Flagged", "Group1")
    with pytest.raises(UnknownTarget):
        resolve_label_targets(g, "Nope*")


@pytest.mark.parametrize("task", [
    label_task("Admin"),
    property_task("age"),
    property_task("nick"),
    property_task("age", exclude=["nick", "Person"]),
])
def test_leakage_guard_small(task):
    prepared = prepare_task(_labelled(40, 100), task)
    prepared.assert_no_leakage()
    for name in task.leakage_exclusion:
        assert name not in prepared.schema.names


def test_leakage_guard_on_planted(planted):
    g, _, _ = planted
    targets = resolve_label_targets(g, "Group*")
    prepared = prepare_task(g, label_task(targets, exclude=["community"]))
    names = set(prepared.schema.names)
    assert not names & set(targets)
    assert "community" not in names
    assert {"topic", "Entity"} <= names
    # the encoded width equals the schema's, so no hidden column slipped in
    assert prepared.features.d == prepared.schema.total_dim


def test_split_covers_only_eligible_vertices():
    g = citations_miniature()
    prepared = prepare_task(g, property_task("ncitations"))
    train, val, test = prepared.masks
    covered = train | val | test
    assert np.array_equal(covered, prepared.targets.eligible)


def test_feature_subset(planted):
    g, _, _ = planted
    prepared = prepare_task(g, property_task("community", mode="classify"))
    assert prepared.feature_subset([]).shape == (g.n, 1)
    np.testing.assert_array_equal(prepared.feature_subset([], "degree")[:, 0], g.degrees())
    topic = prepared.feature_subset(["topic"])
    assert topic.shape == (g.n, 4)
    np.testing.assert_array_equal(topic.sum(axis=1), 1.0)
