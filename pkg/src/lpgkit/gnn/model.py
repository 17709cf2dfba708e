"""The pre-MLP -> 2 GNN layers -> post-MLP stack."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidConfig, NoForwardCache
from .adjacency import NormalizedAdjacency
from .layers import GATConv, GCNConv, GINConv, Layer, Linear, PReLU

MODEL_KINDS = ("gcn", "gin", "gat")


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    in_dim: int
    out_dim: int
    hidden: int = 64
    heads: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise InvalidConfig(f"unknown model kind {self.kind!r}")
        if self.in_dim < 0 or self.out_dim < 1 or self.hidden < 1:
            raise InvalidConfig(f"bad dimensions in {self}")
        if self.kind == "gat" and (self.heads < 1 or self.hidden % self.heads):
            raise InvalidConfig(f"hidden={self.hidden} not divisible by heads={self.heads}")

    def to_json(self) -> dict:
        return asdict(self)


class GnnModel:
    """Linear+PReLU, two message-passing layers, linear output head.

    GCN and GIN layers are followed by their own PReLU; the GAT layer
    already ends in one.
    """

    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        h = config.hidden
        stages: list[tuple[str, Layer]] = [("pre", Linear(config.in_dim, h, rng)), ("pre_act", PReLU())]
        for name in ("conv1", "conv2"):
            if config.kind == "gcn":
                stages += [(name, GCNConv(h, h, rng)), (name + "_act", PReLU())]
            elif config.kind == "gin":
                stages += [(name, GINConv(h, h, rng)), (name + "_act", PReLU())]
            else:
                stages.append((name, GATConv(h, h, rng, heads=config.heads)))
        stages.append(("post", Linear(h, config.out_dim, rng)))
        self.stages = stages
        # all parameters live in one flat buffer; layer arrays are views into it
        arrays = [(layer, k) for _, layer in stages for k in layer.params]
        self.flat = np.concatenate([layer.params[k].ravel() for layer, k in arrays])
        offset = 0
        for layer, k in arrays:
            shape = layer.params[k].shape
            size = layer.params[k].size
            layer.params[k] = self.flat[offset:offset + size].reshape(shape)
            offset += size
        self._forwarded = False
        self._ran = False

    def layer(self, name: str) -> Layer:
        return dict(self.stages)[name]

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{s}.{k}", layer.params[k]) for s, layer in self.stages for k in layer.params]

    def gradients(self) -> list[tuple[str, np.ndarray]]:
        if not self._ran:
            raise NoForwardCache("no backward pass has been run")
        return [(f"{s}.{k}", layer.grads[k]) for s, layer in self.stages for k in layer.params]

    def flat_gradient(self) -> np.ndarray:
        """Gradients concatenated in the layout of :attr:`flat`."""
        return np.concatenate([g.ravel() for _, g in self.gradients()])

    def n_parameters(self) -> int:
        return sum(p.size for _, p in self.parameters())

    def forward(self, adj: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
        h = x
        for _, layer in self.stages:
            h = layer.forward(h, adj)
        self._forwarded = True
        return h

    def backward(self, grad_out: np.ndarray, input_grad: bool = True) -> tuple[dict[str, np.ndarray], np.ndarray | None]:
        """Parameter gradients (by name) and the gradient w.r.t. the input features.

        Training passes ``input_grad=False`` to skip the last, unused product.
        """
        if not self._forwarded:
            raise NoForwardCache("model.backward called before forward")
        g = grad_out
        for _, layer in reversed(self.stages[1:]):
            g = layer.backward(g)
        g = self.stages[0][1].backward(g, input_grad)
        self._ran = True
        return dict(self.gradients()), g

    def predict(self, adj: NormalizedAdjacency, x: np.ndarray) -> np.ndarray:
        out = self.forward(adj, x)
        self._forwarded = False
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.copy() for name, p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for s, layer in self.stages:
            for k in layer.params:
                src = state[f"{s}.{k}"]
                if src.shape != layer.params[k].shape:
                    raise InvalidConfig(f"shape mismatch for {s}.{k}: {src.shape} vs {layer.params[k].shape}")
                layer.params[k][...] = src
