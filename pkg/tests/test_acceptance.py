"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines; the three
training criteria take several minutes on one core.
"""

from __future__ import annotations

import csv
import io
import json
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from lpgkit.ablation import RunSettings, default_jobs, render_heatmap, run_pairwise_ablation, run_uplift_experiment
from lpgkit.cli import main as cli_main
from lpgkit.encoder import encode_entity
from lpgkit.gnn import GATConv, GCNConv, GINConv, NormalizedAdjacency
from lpgkit.graph import Edge, PropertyGraph, Vertex
from lpgkit.lpgio import canonical_records, load_lpg_csv, load_lpg_jsonl, save_lpg_jsonl
from lpgkit.miniatures import MINIATURES
from lpgkit.schema import SchemaOptions, infer_schema
from lpgkit.synth import PLANTED_KEY, PlantedSpec, generate, noise_keys, write_fixture
from lpgkit.tasks import label_task, prepare_task, property_task, resolve_label_targets
from gradcheck import layer_check, model_check
from oracles import as_sparse, random_adjacency

SEEDS = (0, 1, 2, 3, 4)


def verdict(criterion: int, ok: bool, detail: str) -> None:
    print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def planted():
    return generate(PlantedSpec())


@pytest.fixture(scope="module")
def planted_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("planted")
    return write_fixture(PlantedSpec(), out)


# ---------------------------------------------------------------------------
# 1. encoding golden vectors


def test_criterion_1_golden_encoding():
    started = time.perf_counter()
    g = PropertyGraph()
    g.add_vertex(Vertex(0, {"A"}, {"year": [2019]}))
    g.add_vertex(Vertex(1, {"B"}, {"year": [2020]}))
    g.add_vertex(Vertex(2, {"A", "B"}, {"year": [2021]}))
    g.freeze()
    # labels A, B then one-hot year 2019/2020/2021
    expected = {
        0: [1.0, 0.0, 1.0, 0.0, 0.0],
        1: [0.0, 1.0, 0.0, 1.0, 0.0],
        2: [1.0, 1.0, 0.0, 0.0, 1.0],
    }
    probe = Vertex(9, {"B"}, {"year": [2020]})
    problems = []
    for appendix in (False, True):
        schema = infer_schema(g, "vertex", SchemaOptions(integers_as_categorical=True, appendix_layout=appendix))
        if schema.total_dim != 5:
            problems.append(f"appendix={appendix}: d={schema.total_dim}")
        for vid, vec in expected.items():
            got = encode_entity(schema, g.vertex(vid))
            if got.tolist() != vec:
                problems.append(f"appendix={appendix} v{vid}: {got.tolist()}")
        if encode_entity(schema, probe).tolist() != [0.0, 1.0, 0.0, 1.0, 0.0]:
            problems.append(f"appendix={appendix}: probe vertex")
        if encode_entity(schema, Vertex(10)).tolist() != [0.0] * 5:
            problems.append(f"appendix={appendix}: empty vertex")
    elapsed = time.perf_counter() - started
    verdict(1, not problems and elapsed < 1.0, f"bit-exact in both layouts, {elapsed:.3f}s {problems or ''}")


# ---------------------------------------------------------------------------
# 2. gradient suite


def test_criterion_2_gradient_suite():
    started = time.perf_counter()
    worst = {}
    for kind in ("gcn", "gin", "gat"):
        worst[f"{kind} layer"] = max(layer_check(kind, seed) for seed in range(20))
        worst[f"{kind} model"] = max(model_check(kind, 1000 + seed) for seed in range(20))
    elapsed = time.perf_counter() - started
    ok = all(v < 1e-4 for v in worst.values()) and elapsed < 30.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(2, ok, f"max relative error {detail}; {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. attention normalization


def test_criterion_3_attention_normalization():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 17))
        a = random_adjacency(rng, n, float(rng.uniform(0.0, 0.7)))
        x = rng.normal(scale=float(rng.uniform(0.1, 5.0)), size=(n, 3))
        heads = int(rng.integers(1, 5))
        adj = NormalizedAdjacency.from_matrix(as_sparse(a))
        alpha = GATConv(3, 2 * heads, rng, heads=heads).attention(x, adj)
        for k in range(heads):
            sums = np.bincount(adj.center, weights=alpha[:, k], minlength=n)
            worst = max(worst, float(np.abs(sums - 1.0).max()))
    # center 0 with two neighbors identical to it, self-loop included
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = a[0, 2] = a[2, 0] = 1
    adj = NormalizedAdjacency.from_matrix(as_sparse(a))
    alpha = GATConv(2, 8, np.random.default_rng(0), heads=4).attention(np.tile([0.4, -2.0], (3, 1)), adj)
    third = float(np.abs(alpha[adj.center == 0] - 1.0 / 3.0).max())
    verdict(3, worst < 1e-9 and third < 1e-12, f"max |row sum - 1| = {worst:.1e}, max |alpha - 1/3| = {third:.1e}")


# ---------------------------------------------------------------------------
# 4. permutation equivariance


def test_criterion_4_permutation_equivariance():
    rng = np.random.default_rng(4)
    worst = {"gcn": 0.0, "gin": 0.0, "gat": 0.0}
    for _ in range(20):
        a = random_adjacency(rng, 8, float(rng.uniform(0.1, 0.6)))
        x = rng.normal(size=(8, 5))
        perm = rng.permutation(8)
        layers = {
            "gcn": GCNConv(5, 6, rng),
            "gin": GINConv(5, 6, rng, eps=float(rng.uniform(-0.5, 0.5))),
            "gat": GATConv(5, 6, rng, heads=3),
        }
        adj = NormalizedAdjacency.from_matrix(as_sparse(a))
        adj_p = NormalizedAdjacency.from_matrix(as_sparse(a[np.ix_(perm, perm)]))
        for name, layer in layers.items():
            out = layer.forward(x, adj)
            out_p = layer.forward(x[perm], adj_p)
            worst[name] = max(worst[name], float(np.abs(out_p - out[perm]).max()))
    ok = all(v < 1e-10 for v in worst.values())
    verdict(4, ok, ", ".join(f"{k} max diff {v:.1e}" for k, v in worst.items()))


# ---------------------------------------------------------------------------
# 5-7. training criteria; each returns the report CSV(s) compared in 8


def uplift_run(planted):
    graph, _, _ = planted
    prepared = prepare_task(graph, property_task("community", mode="classify"))
    prepared.assert_no_leakage()
    started = time.perf_counter()
    table = run_uplift_experiment(prepared, ["gcn", "gin", "gat"], ["none", f"labels+{PLANTED_KEY}"], SEEDS,
                                  RunSettings(jobs=default_jobs()))
    return table, time.perf_counter() - started


def ablation_run(planted):
    graph, _, _ = planted
    prepared = prepare_task(graph, property_task("community", mode="classify"))
    prepared.assert_no_leakage()
    started = time.perf_counter()
    report = run_pairwise_ablation(prepared, "gcn", SEEDS, RunSettings(jobs=default_jobs()))
    svg = render_heatmap(report)
    return report, svg, time.perf_counter() - started


def completion_run(planted_file, out_dir):
    out = io.StringIO()
    argv = ["complete", "--input", str(planted_file["graph"]), "--kind", "label", "--target", "Group*",
            "--exclude", "community", "--model", "gcn", "--seed", "0", "--out", str(out_dir / "completion.csv")]
    code = cli_main(argv, stdout=out, stderr=io.StringIO())
    assert code == 0
    return (out_dir / "completion.csv").read_text(encoding="utf-8"), out.getvalue()


@pytest.fixture(scope="module")
def uplift(planted):
    return uplift_run(planted)


@pytest.fixture(scope="module")
def ablation(planted):
    return ablation_run(planted)


@pytest.fixture(scope="module")
def completion(planted_file, tmp_path_factory):
    return completion_run(planted_file, tmp_path_factory.mktemp("c7"))


def test_criterion_5_uplift(uplift, planted):
    table, elapsed = uplift
    _, _, cert = planted
    full = f"labels+{PLANTED_KEY}"
    parts, ok = [], elapsed < 300.0
    for model in ("gcn", "gin", "gat"):
        with_props = table.mean(model, full)
        structure = table.mean(model, "none")
        ok &= with_props - structure >= 0.20 and with_props >= 0.85
        parts.append(f"{model} {with_props:.3f} vs {structure:.3f}")
    detail = f"{'; '.join(parts)} (ceiling {cert['property_bayes_accuracy']:.3f}); {elapsed:.0f}s"
    verdict(5, ok, detail)


def test_criterion_6_ablation(ablation, tmp_path):
    report, svg, elapsed = ablation
    planted_delta = report.delta(PLANTED_KEY)
    noise = {k: report.delta(k) for k in noise_keys(PlantedSpec())}
    m = report.matrix()
    symmetric = bool(np.array_equal(m, m.T, equal_nan=True))
    diagonal = all(m[i, i] == report.single(k) for i, k in enumerate(report.keys))
    (tmp_path / "ablation.csv").write_text(report.to_csv(), encoding="utf-8")
    (tmp_path / "ablation.svg").write_text(svg, encoding="utf-8")
    rows = list(csv.reader(io.StringIO((tmp_path / "ablation.csv").read_text(encoding="utf-8"))))
    root = ET.parse(tmp_path / "ablation.svg").getroot()
    emitted = rows[0] == ["feature", "mean", "std", "delta"] and len(rows) == 1 + len(report.cells)
    emitted &= root.tag.endswith("svg")
    ok = (planted_delta >= 0.15 and all(abs(d) <= 0.03 for d in noise.values())
          and symmetric and diagonal and emitted and elapsed < 600.0)
    noise_text = ", ".join(f"{k} {100 * d:+.1f}" for k, d in noise.items())
    verdict(6, ok, f"{PLANTED_KEY} {100 * planted_delta:+.1f} pts; noise {noise_text}; "
                   f"symmetric={symmetric}; csv+svg ok={emitted}; {elapsed:.0f}s")


def test_criterion_7_completion(completion, planted, planted_file):
    text, stdout = completion
    graph, _, cert = planted
    rows = list(csv.DictReader(io.StringIO(text)))
    masked = [r for r in rows if r["split"] == "test"]
    accuracy = sum(r["target"] == r["prediction"] for r in masked) / len(masked)
    threshold = cert["property_bayes_accuracy"] - 0.05
    # leakage guard over every task the fixture supports
    groups = resolve_label_targets(graph, "Group*")
    tasks = [label_task(groups, exclude=["community"]), label_task("Flagged"), label_task(groups)]
    tasks += [property_task(k, mode="classify") for k in ("community", PLANTED_KEY, "color", "note")]
    tasks += [property_task(k) for k in ("score", "weight")]
    guarded = 0
    for task in tasks:
        prepared = prepare_task(graph, task)
        prepared.assert_no_leakage()
        assert not set(task.targets) & set(prepared.schema.names)
        guarded += 1
    ok = accuracy >= threshold and len(masked) == round(0.1 * graph.n) and len(rows) == graph.n
    verdict(7, ok, f"masked-set accuracy {accuracy:.3f} on {len(masked)} vertices >= {threshold:.3f}; "
                   f"leakage guard held for {guarded} tasks; cli said {stdout.strip()}")


# ---------------------------------------------------------------------------
# 8. determinism


def test_criterion_8_determinism(uplift, ablation, completion, planted, planted_file, tmp_path):
    table, _ = uplift
    report, svg, _ = ablation
    text, _ = completion
    fresh = generate(PlantedSpec())
    same_fixture = canonical_records(fresh[0]) == canonical_records(planted[0])
    table2, _ = uplift_run(fresh)
    report2, svg2, _ = ablation_run(fresh)
    text2, _ = completion_run(planted_file, tmp_path)
    checks = {
        "fixture": same_fixture,
        "uplift csv": table2.to_csv().encode() == table.to_csv().encode(),
        "ablation csv": report2.to_csv().encode() == report.to_csv().encode(),
        "ablation svg": svg2.encode() == svg.encode(),
        "completion csv": text2.encode() == text.encode(),
    }
    verdict(8, all(checks.values()), ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in checks.items()))


# ---------------------------------------------------------------------------
# 9. I/O round trip


def _all_kinds_graph() -> PropertyGraph:
    g = PropertyGraph(directed=True)
    g.add_vertex(Vertex(0, {"Paper", "Journal"}, {
        "year": [2019, 2020],
        "score": [0.5, -1e-300, 1.7976931348623157e308],
        "open": [True, False],
        "title": ["Graph Learning", "ünïcode \"quoted\"\n", ""],
        "emb": [[1.0, 2.5], [0.1, -3.0]],
        "big": [-(2**63), 2**63 - 1],
    }))
    g.add_vertex(Vertex(7, (), {"mixed": [1, 1.0, True, "1"]}))
    g.add_vertex(Vertex(3, {"Author"}))
    g.add_edge(Edge(0, 0, 7, {"cites", "strong"}, {"w": [0.25, 4.0], "since": [1999]}))
    g.add_edge(Edge(5, 3, 3, (), {"note": ["self"]}))
    g.add_edge(Edge(2, 7, 0))
    return g.freeze()


def _csv_graph(root) -> PropertyGraph:
    (root / "nodes.csv").write_text("id,labels,year,pos,ok,title\n0,Paper;Journal,2020,1;2,true,graph\n"
                                    "1,Author,,,false,\n", encoding="utf-8")
    (root / "edges.csv").write_text("src,dst,labels,w\n0,1,WROTE,0.5\n", encoding="utf-8")
    manifest = {"directed": True,
                "nodes": {"id": "id", "labels": "labels(;)", "year": "prop:int", "pos": "prop:realvec(;)",
                          "ok": "prop:bool", "title": "prop:text"},
                "edges": {"src": "src", "dst": "dst", "labels": "labels", "w": "prop:real"}}
    (root / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
    return load_lpg_csv(root / "nodes.csv", root / "edges.csv", root / "manifest.json")


def test_criterion_9_io_round_trip(planted_file, tmp_path):
    fixtures = {"planted": load_lpg_jsonl(planted_file["graph"]), "all-kinds": _all_kinds_graph(),
                "csv": _csv_graph(tmp_path), "empty": PropertyGraph().freeze()}
    fixtures.update({f"{name}-miniature": make() for name, make in MINIATURES.items()})
    fixtures["planted-small"] = generate(PlantedSpec(n=60, seed=3))[0]
    results = {}
    for name, graph in fixtures.items():
        path = tmp_path / f"{name}.jsonl"
        save_lpg_jsonl(graph, path)
        first = path.read_bytes()
        back = load_lpg_jsonl(path)
        save_lpg_jsonl(back, path)
        results[name] = canonical_records(back) == canonical_records(graph) and path.read_bytes() == first
    verdict(9, all(results.values()), ", ".join(f"{k} {'ok' if v else 'MISMATCH'}" for k, v in results.items()))
