"""Adam + cosine annealing over node-sampled subgraphs, with masked losses."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import EmptyMask, InvalidConfig, ShapeMismatch
from .gnn.adjacency import NormalizedAdjacency, build_normalized_adjacency, induced_subgraph
from .gnn.model import GnnModel, ModelConfig

CLASSIFICATION = "classification"
REGRESSION = "regression"
FULL_BATCH = "full"
NODE_SUBGRAPH = "subgraph"


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings.

    ``batch_size`` is the number of sampled subgraphs (optimizer steps) per
    epoch. ``nodes_per_batch=None`` picks ``min(n, max(ceil(n / 32), 256))``.
    The full-batch sampler takes the same number of steps on the whole graph.
    """

    epochs: int = 100
    batch_size: int = 32
    lr0: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    task: str = CLASSIFICATION
    num_classes: int = 2
    sampler: str = NODE_SUBGRAPH
    nodes_per_batch: int | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if not self.lr0 >= 0:
            raise InvalidConfig("lr0 must be non-negative")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise InvalidConfig(f"unknown task {self.task!r}")
        if self.sampler not in (FULL_BATCH, NODE_SUBGRAPH):
            raise InvalidConfig(f"unknown sampler {self.sampler!r}")
        if self.task == CLASSIFICATION and self.num_classes < 2:
            raise InvalidConfig("classification needs num_classes >= 2")
        if self.nodes_per_batch is not None and self.nodes_per_batch < 1:
            raise InvalidConfig("nodes_per_batch must be >= 1")

    def resolved_nodes_per_batch(self, n: int) -> int:
        if self.sampler == FULL_BATCH:
            return n
        if self.nodes_per_batch is not None:
            return min(self.nodes_per_batch, n)
        return min(n, max(math.ceil(n / 32), 256))

    @property
    def out_dim(self) -> int:
        return self.num_classes if self.task == CLASSIFICATION else 1


# ---------------------------------------------------------------------------
# optimizer and schedule


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads and state differ in length")
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeMismatch(f"{p.shape} vs {g.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        sq = np.multiply(g, g)
        sq *= 1.0 - beta2
        v += sq
        # p -= lr * (m / c1) / (sqrt(v / c2) + eps), with fewer temporaries
        denom = np.multiply(v, 1.0 / c2)
        np.sqrt(denom, out=denom)
        denom += eps
        step = np.multiply(m, lr / c1)
        step /= denom
        p -= step


def cosine_lr(epoch: int, epochs: int, lr0: float) -> float:
    return max(0.0, lr0 * 0.5 * (1.0 + math.cos(math.pi * epoch / epochs)))


# ---------------------------------------------------------------------------
# sampling


@dataclass
class Subgraph:
    nodes: np.ndarray  # positions in the parent graph, ascending
    adj: NormalizedAdjacency


def sample_node_subgraph(adj, nodes_per_batch: int, rng: np.random.Generator) -> Subgraph:
    """Uniform node sample without replacement and its induced subgraph.

    ``adj`` is a NormalizedAdjacency, a scipy matrix or a PropertyGraph.
    Asking for every node returns the whole graph without touching ``rng``.
    """
    if not isinstance(adj, NormalizedAdjacency):
        adj = build_normalized_adjacency(adj)
    n = adj.n
    if nodes_per_batch >= n:
        return Subgraph(np.arange(n), adj)
    nodes = np.sort(rng.choice(n, size=nodes_per_batch, replace=False))
    return Subgraph(nodes, induced_subgraph(adj, nodes))


class BatchPlan:
    """The sequence of node samples drawn by one training seed.

    Sampling consumes nothing but the seed's generator, so runs that differ
    only in features or model kind see the same batches. With ``keep=True``
    the induced operators are built once and reused across such runs.
    """

    def __init__(self, adj: NormalizedAdjacency, config: TrainConfig, keep: bool = False):
        self.adj = adj
        self.nodes_per_batch = config.resolved_nodes_per_batch(adj.n)
        self.key = (adj.n, self.nodes_per_batch, config.epochs, config.batch_size, config.seed)
        self.keep = keep
        self._rng = np.random.default_rng(config.seed)
        self._batches: list[Subgraph] = []
        self._drawn = 0

    def matches(self, adj: NormalizedAdjacency, config: TrainConfig) -> bool:
        k = config.resolved_nodes_per_batch(adj.n)
        return self.adj is adj and self.key == (adj.n, k, config.epochs, config.batch_size, config.seed)

    def batch(self, i: int) -> Subgraph:
        if i < len(self._batches):
            return self._batches[i]
        if i != self._drawn:
            raise InvalidConfig("batches of a non-keeping plan must be drawn in order, once")
        sub = sample_node_subgraph(self.adj, self.nodes_per_batch, self._rng)
        self._drawn += 1
        if self.keep:
            self._batches.append(sub)
        return sub


# ---------------------------------------------------------------------------
# losses and metrics


def _mask_index(mask: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        raise EmptyMask("mask selects no entities")
    return idx


def loss_and_grad(task: str, outputs: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy or mean squared error over the masked rows."""
    idx = _mask_index(mask)
    grad = np.zeros_like(outputs)
    if task == CLASSIFICATION:
        logits = outputs[idx]
        y = targets[idx].astype(np.int64)
        rows = np.arange(len(idx))
        shifted = logits - logits.max(axis=1, keepdims=True)
        ex = np.exp(shifted)
        total = ex.sum(axis=1)
        loss = float(np.mean(np.log(total) - shifted[rows, y]))
        ex /= total[:, None]
        ex[rows, y] -= 1.0
        ex /= len(idx)
        grad[idx] = ex
    else:
        diff = outputs[idx, 0] - targets[idx]
        loss = float(np.mean(diff * diff))
        grad[idx, 0] = 2.0 * diff / len(idx)
    return loss, grad


def metric_from_outputs(task: str, outputs: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> float:
    idx = _mask_index(mask)
    if task == CLASSIFICATION:
        return float(np.mean(outputs[idx].argmax(axis=1) == targets[idx].astype(np.int64)))
    return float(np.mean(np.abs(outputs[idx, 0] - targets[idx])))


def higher_is_better(task: str) -> bool:
    return task == CLASSIFICATION


def metric_name(task: str) -> str:
    return "accuracy" if task == CLASSIFICATION else "mae"


@dataclass
class TargetScaler:
    """Standardizes regression targets with training-split moments."""

    mean: float = 0.0
    std: float = 1.0

    @classmethod
    def fit(cls, targets: np.ndarray, mask: np.ndarray) -> "TargetScaler":
        vals = targets[mask]
        std = float(np.std(vals))
        return cls(float(np.mean(vals)), std if std > 0 else 1.0)

    def transform(self, y: np.ndarray) -> np.ndarray:
        return (y - self.mean) / self.std

    def inverse(self, out: np.ndarray) -> np.ndarray:
        return out * self.std + self.mean


def predict(model: GnnModel, adj: NormalizedAdjacency, features: np.ndarray, scaler: TargetScaler | None = None) -> np.ndarray:
    out = model.predict(adj, features)
    return scaler.inverse(out) if scaler is not None else out


def evaluate(
    model: GnnModel,
    adj: NormalizedAdjacency,
    features: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray,
    task: str,
    scaler: TargetScaler | None = None,
) -> float:
    """Accuracy (classification) or MAE in target units (regression)."""
    _mask_index(mask)
    return metric_from_outputs(task, predict(model, adj, features, scaler), targets, mask)


# ---------------------------------------------------------------------------
# training


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_metric: float


@dataclass
class TrainReport:
    metric: str
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = float("nan")
    test_metric: float = float("nan")
    wall_time: float = 0.0
    target_mean: float = 0.0
    target_std: float = 1.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "lr", "train_loss", "val_metric"])
        for rec in self.history:
            w.writerow([rec.epoch, repr(rec.lr), repr(rec.train_loss), repr(rec.val_metric)])
        return buf.getvalue()

    def summary(self, include_time: bool = False) -> dict:
        out = {
            "metric": self.metric,
            "best_epoch": self.best_epoch,
            "best_val": self.best_val,
            "test_metric": self.test_metric,
            "epochs": len(self.history),
            "target_mean": self.target_mean,
            "target_std": self.target_std,
        }
        if include_time:
            out["wall_time"] = self.wall_time
        return out

    def summary_json(self, include_time: bool = False) -> str:
        return json.dumps(self.summary(include_time), sort_keys=True, indent=1)


def _as_masks(splits, n: int, graph=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if hasattr(splits, "as_arrays"):
        return splits.as_arrays(graph)
    train, val, test = (np.asarray(m, dtype=bool) for m in splits)
    for m in (train, val, test):
        if m.shape != (n,):
            raise ShapeMismatch(f"mask shape {m.shape} for {n} vertices")
    return train, val, test


def train(
    graph,
    features: np.ndarray,
    targets: np.ndarray,
    splits,
    model_config: ModelConfig,
    config: TrainConfig,
    plan: BatchPlan | None = None,
) -> tuple[GnnModel, TrainReport]:
    """Fit a model; the checkpoint with the best validation metric is kept.

    ``graph`` is a PropertyGraph, a scipy neighbor-count matrix or a
    NormalizedAdjacency whose rows line up with ``features`` and ``targets``.
    ``splits`` is a SplitMasks or a (train, val, test) triple of boolean
    arrays. ``plan`` shares sampled batches between runs of the same seed.
    """
    started = time.perf_counter()
    if plan is not None:
        full_adj = plan.adj
    elif isinstance(graph, NormalizedAdjacency):
        full_adj = graph
    else:
        full_adj = build_normalized_adjacency(graph)
    n = full_adj.n
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] != n:
        raise ShapeMismatch(f"{features.shape[0]} feature rows for {n} vertices")
    if model_config.in_dim != features.shape[1] or model_config.out_dim != config.out_dim:
        raise InvalidConfig("model dimensions do not match features/task")
    targets = np.asarray(targets, dtype=np.float64)
    is_graph = not (sp.issparse(graph) or isinstance(graph, NormalizedAdjacency))
    train_mask, val_mask, test_mask = _as_masks(splits, n, graph if is_graph else None)
    _mask_index(train_mask)

    scaler = None
    fit_targets = targets
    if config.task == REGRESSION:
        scaler = TargetScaler.fit(targets, train_mask)
        fit_targets = scaler.transform(targets)

    model = GnnModel(model_config)
    params = [model.flat]
    state = AdamState.zeros_like(params)
    if plan is None:
        plan = BatchPlan(full_adj, config)
    elif not plan.matches(full_adj, config):
        raise InvalidConfig("batch plan was drawn for a different graph or configuration")
    better = np.greater if higher_is_better(config.task) else np.less

    report = TrainReport(metric=metric_name(config.task))
    if scaler is not None:
        report.target_mean, report.target_std = scaler.mean, scaler.std
    best_state = model.state_dict()
    eval_val = val_mask if val_mask.any() else train_mask
    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config.epochs, config.lr0)
        losses = []
        for step in range(config.batch_size):
            sub = plan.batch(epoch * config.batch_size + step)
            batch_mask = train_mask[sub.nodes]
            if not batch_mask.any():
                continue
            adj = sub.adj
            out = model.forward(adj, features[sub.nodes])
            loss, grad = loss_and_grad(config.task, out, fit_targets[sub.nodes], batch_mask)
            model.backward(grad, input_grad=False)
            adam_step(params, [model.flat_gradient()], state, lr, config.beta1, config.beta2, config.eps)
            losses.append(loss)
        val = evaluate(model, full_adj, features, targets, eval_val, config.task, scaler)
        train_loss = float(np.mean(losses)) if losses else float("nan")
        report.history.append(EpochRecord(epoch, lr, train_loss, val))
        if report.best_epoch < 0 or better(val, report.best_val):
            report.best_epoch, report.best_val = epoch, val
            best_state = model.state_dict()

    model.load_state_dict(best_state)
    if test_mask.any():
        report.test_metric = evaluate(model, full_adj, features, targets, test_mask, config.task, scaler)
    report.wall_time = time.perf_counter() - started
    return model, report


def summarize(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation across repeat seeds."""
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
