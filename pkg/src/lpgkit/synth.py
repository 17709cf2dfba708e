"""Seeded planted-signal LPGs with an analytic accuracy ceiling."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpec
from .graph import Edge, PropertyGraph, Vertex
from .lpgio import save_lpg_jsonl

CLASS_KEY = "community"
PLANTED_KEY = "topic"
PLANTED_SCALAR_KEY = "score"
GROUP_PREFIX = "Group"
BASE_LABEL = "Entity"
NOISE_LABEL = "Flagged"
EDGE_LABEL = "LINKS"

_NOISE_WORDS = (
    "graph", "vertex", "edge", "label", "query", "index", "store", "schema",
    "join", "path", "node", "table", "cache", "shard", "log", "batch",
)
_NOISE_COLORS = ("red", "green", "blue", "amber", "violet")


@dataclass(frozen=True)
class PlantedSpec:
    """Generator parameters.

    ``rho``: the planted categorical ``topic`` equals the class w.p. rho,
    otherwise it is uniform over all classes. ``rho_label``: same rule for the
    ``Group<c>`` label. ``scalar_sep``: class means of ``score`` are
    ``class * scalar_sep`` (unit variance).
    """

    n: int = 2000
    classes: int = 4
    p_intra: float = 0.02
    p_inter: float = 0.002
    rho: float = 0.9
    scalar_sep: float = 1.0
    noise_categorical: int = 1
    noise_scalar: int = 1
    noise_text: int = 1
    rho_label: float = 0.9
    flag_rate: float = 0.3
    text_pool: int = 48
    seed: int = 0

    def validate(self) -> None:
        if self.classes < 2:
            raise InvalidSpec("classes must be >= 2")
        if self.n < self.classes:
            raise InvalidSpec("need at least one vertex per class")
        if not 0.5 < self.rho <= 1.0:
            raise InvalidSpec("rho must lie in (0.5, 1]")
        if not 0.0 <= self.rho_label <= 1.0:
            raise InvalidSpec("rho_label must lie in [0, 1]")
        if not (self.p_intra > self.p_inter >= 0.0 and self.p_intra <= 1.0):
            raise InvalidSpec("need 1 >= p_intra > p_inter >= 0")
        if min(self.noise_categorical, self.noise_scalar, self.noise_text) < 0:
            raise InvalidSpec("noise key counts must be non-negative")
        if self.text_pool < 1:
            raise InvalidSpec("text_pool must be >= 1")

    @classmethod
    def from_json(cls, doc: dict) -> "PlantedSpec":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown spec fields: {sorted(unknown)}")
        return cls(**doc)


def noise_keys(spec: PlantedSpec) -> list[str]:
    def names(prefix, count):
        return [prefix if count == 1 else f"{prefix}{i}" for i in range(count)]

    return names("color", spec.noise_categorical) + names("weight", spec.noise_scalar) + names("note", spec.noise_text)


def group_labels(spec: PlantedSpec) -> list[str]:
    return [f"{GROUP_PREFIX}{c}" for c in range(spec.classes)]


def property_bayes_accuracy(rho: float, classes: int) -> float:
    """Best accuracy from the planted value alone: rho + (1 - rho) / C."""
    return rho + (1.0 - rho) / classes


def label_bayes_accuracy(rho: float, rho_label: float, classes: int) -> float:
    """Best accuracy for the Group label from the planted value alone.

    Predicting the label equal to the planted value is right when both agree
    with the class, or when both miss it and land on the same wrong class.
    """
    a = property_bayes_accuracy(rho, classes)
    b = property_bayes_accuracy(rho_label, classes)
    return a * b + (1.0 - a) * (1.0 - b) / (classes - 1)


def _noise_pool(key: str, size: int, text_pool: int, rng: np.random.Generator) -> list:
    if key.startswith("color"):
        return [_NOISE_COLORS[i] for i in rng.integers(0, len(_NOISE_COLORS), size=size)]
    if key.startswith("weight"):
        return [float(x) for x in rng.normal(size=size)]
    # a small phrase pool keeps the text from acting as a vertex identifier
    words = rng.integers(0, len(_NOISE_WORDS), size=(text_pool, 3))
    phrases = [" ".join(_NOISE_WORDS[w] for w in row) for row in words]
    return [phrases[i] for i in rng.integers(0, text_pool, size=size)]


def _class_balanced(keys: list[str], spec: PlantedSpec, blocks: list[np.ndarray], rng: np.random.Generator) -> dict[str, list]:
    """Noise columns whose joint empirical distribution is identical in every class.

    One pool of noise tuples is drawn and each class receives a random
    permutation of it. With independent draws per vertex, a community's
    realized value mix differs slightly from the others', and a GNN on a
    homophilous graph picks that difference up as a community fingerprint.
    """
    size = max(len(b) for b in blocks)
    pools = {key: _noise_pool(key, size, spec.text_pool, rng) for key in keys}
    cols: dict[str, list] = {key: [None] * spec.n for key in keys}
    for members in blocks:
        picks = rng.permutation(size)[: len(members)]
        for key in keys:
            pool, col = pools[key], cols[key]
            for v, i in zip(members, picks):
                col[v] = pool[i]
    return cols


def _triangular_pairs(k: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Decode linear indices into (i, j), i < j, of a size x size upper triangle."""
    k = k.astype(np.float64)
    i = size - 2 - np.floor(np.sqrt(-8.0 * k + 4.0 * size * (size - 1) - 7.0) / 2.0 - 0.5)
    j = k + i + 1 - size * (size - 1) / 2.0 + (size - i) * ((size - i) - 1) / 2.0
    return i.astype(np.int64), j.astype(np.int64)


def _sbm_edges(blocks: list[np.ndarray], p_intra: float, p_inter: float, rng: np.random.Generator):
    src, dst = [], []
    for a in range(len(blocks)):
        for b in range(a, len(blocks)):
            p = p_intra if a == b else p_inter
            na, nb = len(blocks[a]), len(blocks[b])
            total = na * (na - 1) // 2 if a == b else na * nb
            if total == 0 or p == 0:
                continue
            count = rng.binomial(total, p)
            picks = rng.choice(total, size=count, replace=False)
            if a == b:
                i, j = _triangular_pairs(picks, na)
                src.append(blocks[a][i])
                dst.append(blocks[a][j])
            else:
                src.append(blocks[a][picks // nb])
                dst.append(blocks[b][picks % nb])
    if not src:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    src, dst = np.concatenate(src), np.concatenate(dst)
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    order = np.lexsort((hi, lo))
    return lo[order], hi[order]


def khop_majority_accuracy(indptr: np.ndarray, indices: np.ndarray, classes: np.ndarray, hops: int = 1) -> float:
    """Accuracy of guessing each vertex's class as the majority among its k-hop neighbors.

    Ties go to the smallest class; vertices without neighbors get the global
    majority class.
    """
    n = len(classes)
    n_cls = int(classes.max()) + 1
    fallback = int(np.bincount(classes, minlength=n_cls).argmax())
    correct = 0
    for v in range(n):
        frontier, seen = {v}, {v}
        for _ in range(hops):
            nxt = set()
            for u in frontier:
                nxt.update(int(x) for x in indices[indptr[u]:indptr[u + 1]])
            frontier = nxt - seen
            seen |= nxt
        seen.discard(v)
        if seen:
            guess = int(np.bincount(classes[list(seen)], minlength=n_cls).argmax())
        else:
            guess = fallback
        correct += guess == classes[v]
    return float(correct / n)


def generate(spec: PlantedSpec) -> tuple[PropertyGraph, np.ndarray, dict]:
    """Build the fixture graph, its ground-truth classes (by vertex id) and a certificate."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, C = spec.n, spec.classes
    classes = rng.permutation(np.arange(n) % C)

    def noisy_copy(rate: float) -> np.ndarray:
        keep = rng.random(n) < rate
        return np.where(keep, classes, rng.integers(0, C, size=n))

    topic = noisy_copy(spec.rho)
    group = noisy_copy(spec.rho_label)
    flagged = rng.random(n) < spec.flag_rate
    score = classes * spec.scalar_sep + rng.normal(size=n)
    blocks = [np.flatnonzero(classes == c) for c in range(C)]
    noise_cols = _class_balanced(noise_keys(spec), spec, blocks, rng)

    src, dst = _sbm_edges(blocks, spec.p_intra, spec.p_inter, rng)
    years = rng.integers(2000, 2021, size=len(src))

    graph = PropertyGraph(directed=False)
    for v in range(n):
        labels = [BASE_LABEL, f"{GROUP_PREFIX}{group[v]}"]
        if flagged[v]:
            labels.append(NOISE_LABEL)
        props = {
            CLASS_KEY: [int(classes[v])],
            PLANTED_KEY: [f"t{topic[v]}"],
            PLANTED_SCALAR_KEY: [float(score[v])],
        }
        for key, col in noise_cols.items():
            props[key] = [col[v]]
        graph.add_vertex(Vertex(v, labels, props))
    for eid, (a, b, y) in enumerate(zip(src, dst, years)):
        graph.add_edge(Edge(eid, int(a), int(b), [EDGE_LABEL], {"since": [int(y)]}))
    graph.freeze()

    indptr, indices = graph.csr
    certificate = {
        "property_bayes_accuracy": property_bayes_accuracy(spec.rho, C),
        "label_bayes_accuracy": label_bayes_accuracy(spec.rho, spec.rho_label, C),
        # best Group-label accuracy even with the class known exactly
        "label_ceiling": property_bayes_accuracy(spec.rho_label, C),
        "structure_khop_majority": khop_majority_accuracy(indptr, indices, classes, hops=1),
        "class_prior": float(np.bincount(classes, minlength=C).max() / n),
        "expected_edges": _expected_edges(spec),
        "edges": graph.m,
    }
    return graph, classes, certificate


def _expected_edges(spec: PlantedSpec) -> float:
    sizes = [len(range(c, spec.n, spec.classes)) for c in range(spec.classes)]
    intra = sum(s * (s - 1) / 2 for s in sizes)
    total = spec.n * (spec.n - 1) / 2
    return intra * spec.p_intra + (total - intra) * spec.p_inter


def write_fixture(spec: PlantedSpec, out_dir: str | Path) -> dict[str, Path]:
    """Write ``graph.jsonl``, ``targets.csv``, ``certificate.json`` and ``spec.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    graph, classes, cert = generate(spec)
    paths = {
        "graph": out / "graph.jsonl",
        "targets": out / "targets.csv",
        "certificate": out / "certificate.json",
        "spec": out / "spec.json",
    }
    save_lpg_jsonl(graph, paths["graph"])
    with open(paths["targets"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,class\n")
        for vid, c in enumerate(classes):
            fh.write(f"{vid},{int(c)}\n")
    paths["certificate"].write_text(json.dumps(cert, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    paths["spec"].write_text(json.dumps(asdict(spec), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return paths


def mutual_information(x, y) -> float:
    """Plug-in mutual information (nats) between two discrete samples, Miller-Madow corrected."""
    x = np.unique(np.asarray(x), return_inverse=True)[1]
    y = np.unique(np.asarray(y), return_inverse=True)[1]
    n = len(x)
    joint = np.zeros((x.max() + 1, y.max() + 1))
    np.add.at(joint, (x, y), 1.0)

    def entropy(counts):
        p = counts[counts > 0] / n
        return float(-(p * np.log(p)).sum()) + (np.count_nonzero(counts) - 1) / (2 * n)

    return max(0.0, entropy(joint.sum(1)) + entropy(joint.sum(0)) - entropy(joint.ravel()))

