from __future__ import annotations

import json

import numpy as np
import pytest

from lpgkit.errors import InvalidSpec
from lpgkit.lpgio import canonical_records, load_lpg_jsonl
from lpgkit.synth import (
    PlantedSpec,
    generate,
    khop_majority_accuracy,
    label_bayes_accuracy,
    mutual_information,
    noise_keys,
    property_bayes_accuracy,
    write_fixture,
)


@pytest.fixture(scope="module")
def default_fixture():
    return generate(PlantedSpec())


def test_certificate_values(default_fixture):
    _, _, cert = default_fixture
    assert cert["property_bayes_accuracy"] == pytest.approx(0.925)
    assert cert["label_ceiling"] == pytest.approx(0.925)
    assert cert["class_prior"] == pytest.approx(0.25)
    assert 0.0 < cert["label_bayes_accuracy"] < cert["property_bayes_accuracy"]


def test_label_bayes_by_enumeration():
    # P(group == topic) summed over (class, value) with C = 3
    C, rho, rl = 3, 0.8, 0.6

    def dist(r):
        return np.array([[r + (1 - r) / C if t == c else (1 - r) / C for t in range(C)] for c in range(C)])

    pt, pg = dist(rho), dist(rl)
    agree = sum(pt[c, t] * pg[c, t] for c in range(C) for t in range(C)) / C
    assert label_bayes_accuracy(rho, rl, C) == pytest.approx(agree, abs=1e-15)


def test_edge_count_near_expectation(default_fixture):
    _, _, cert = default_fixture
    assert abs(cert["edges"] - cert["expected_edges"]) <= 0.1 * cert["expected_edges"]


def test_planted_topic_matches_rho(default_fixture):
    g, classes, _ = default_fixture
    topic = np.array([int(v.properties["topic"][0][1:]) for v in g.vertices()])
    agree = float(np.mean(topic == classes))
    # rho + (1 - rho) / C = 0.925, binomial sd about 0.006
    assert abs(agree - property_bayes_accuracy(0.9, 4)) < 0.03


def test_noise_keys_carry_no_class_information(default_fixture):
    g, classes, _ = default_fixture
    assert noise_keys(PlantedSpec()) == ["color", "weight", "note"]
    for key in ("color", "note"):
        values = [v.properties[key][0] for v in g.vertices()]
        assert mutual_information(values, classes) < 0.01
    weight = np.array([v.properties["weight"][0] for v in g.vertices()])
    bins = np.digitize(weight, np.quantile(weight, [0.25, 0.5, 0.75]))
    assert mutual_information(bins, classes) < 0.01


def test_mutual_information_detects_dependence():
    x = np.arange(400) % 4
    assert mutual_information(x, x) == pytest.approx(np.log(4), abs=0.01)


def test_structure_alone_is_informative(default_fixture):
    g, classes, cert = default_fixture
    indptr, indices = g.csr
    assert cert["structure_khop_majority"] == khop_majority_accuracy(indptr, indices, classes)
    assert cert["structure_khop_majority"] > 0.9


def test_determinism(tmp_path):
    spec = PlantedSpec(n=120, seed=9)
    a = write_fixture(spec, tmp_path / "a")
    b = write_fixture(spec, tmp_path / "b")
    for name in a:
        assert a[name].read_bytes() == b[name].read_bytes()
    c = write_fixture(PlantedSpec(n=120, seed=10), tmp_path / "c")
    assert c["graph"].read_bytes() != a["graph"].read_bytes()
    g = load_lpg_jsonl(a["graph"])
    assert canonical_records(g) == canonical_records(generate(spec)[0])
    assert json.loads(a["spec"].read_text())["seed"] == 9


@pytest.mark.parametrize("bad", [
    {"classes": 1},
    {"rho": 0.4},
    {"p_intra": 0.001, "p_inter": 0.01},
    {"noise_text": -1},
    {"n": 2, "classes": 3},
])
def test_invalid_specs(bad):
    with pytest.raises(InvalidSpec):
        generate(PlantedSpec(**bad))
    with pytest.raises(InvalidSpec):
        PlantedSpec.from_json({"bogus": 1})
