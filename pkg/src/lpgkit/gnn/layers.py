"""Layers with hand-written backward passes.

Every layer keeps ``params`` and ``grads`` dicts with matching keys and
caches what backward needs during forward. ``backward`` overwrites ``grads``
and returns the gradient with respect to the layer input.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimMismatch, NoForwardCache
from .adjacency import NormalizedAdjacency

LEAKY_SLOPE = 0.2
PRELU_INIT = 0.25


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = math.sqrt(6.0 / max(fan_in + fan_out, 1))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def prelu(x: np.ndarray, slope: float) -> np.ndarray:
    # arithmetic with in-place updates; np.where on a random mask is far slower
    out = np.multiply(np.minimum(x, 0.0), slope - 1.0)
    out += x
    return out


def prelu_backward(g: np.ndarray, x: np.ndarray, slope: float) -> tuple[np.ndarray, float]:
    """Gradient w.r.t. the input and w.r.t. the slope."""
    gx = np.greater(x, 0).astype(np.float64)
    gx *= 1.0 - slope
    gx += slope
    gx *= g
    return gx, float(np.vdot(g, np.minimum(x, 0.0)))


class Layer:
    graph_op = False

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def _take_cache(self):
        if self._cache is None:
            raise NoForwardCache(f"{type(self).__name__}.backward called before forward")
        return self._cache

    def _check_input(self, x: np.ndarray, in_dim: int) -> None:
        if x.ndim != 2 or x.shape[1] != in_dim:
            raise DimMismatch(f"{type(self).__name__} expects (n, {in_dim}) input, got {x.shape}")


class Linear(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        self.params = {"W": glorot(rng, in_dim, out_dim), "b": np.zeros(out_dim)}

    def forward(self, x: np.ndarray, adj: NormalizedAdjacency | None = None) -> np.ndarray:
        self._check_input(x, self.in_dim)
        self._cache = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, g: np.ndarray, input_grad: bool = True) -> np.ndarray | None:
        x = self._take_cache()
        self.grads = {"W": x.T @ g, "b": g.sum(axis=0)}
        return g @ self.params["W"].T if input_grad else None


class PReLU(Layer):
    """Parametric ReLU with one shared learnable slope."""

    def __init__(self, init: float = PRELU_INIT):
        super().__init__()
        self.params = {"slope": np.array([init])}

    def forward(self, x: np.ndarray, adj: NormalizedAdjacency | None = None) -> np.ndarray:
        self._cache = x
        return prelu(x, self.params["slope"][0])

    def backward(self, g: np.ndarray) -> np.ndarray:
        x = self._take_cache()
        gx, gslope = prelu_backward(g, x, self.params["slope"][0])
        self.grads = {"slope": np.array([gslope])}
        return gx


class GCNConv(Layer):
    """H' = Â H W + b with Â the symmetric-normalized adjacency plus self-loops."""

    graph_op = True

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        self.params = {"W": glorot(rng, in_dim, out_dim), "b": np.zeros(out_dim)}

    def forward(self, x: np.ndarray, adj: NormalizedAdjacency) -> np.ndarray:
        self._check_input(x, self.in_dim)
        xw = x @ self.params["W"]
        self._cache = (x, adj)
        return adj.norm @ xw + self.params["b"]

    def backward(self, g: np.ndarray) -> np.ndarray:
        x, adj = self._take_cache()
        gxw = adj.norm_t @ g
        self.grads = {"W": x.T @ gxw, "b": g.sum(axis=0)}
        return gxw @ self.params["W"].T


class GINConv(Layer):
    """H' = MLP((1 + eps) H_i + sum_{j in N(i)} H_j), MLP = Linear-PReLU-Linear."""

    graph_op = True

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, eps: float = 0.0):
        super().__init__()
        self.in_dim, self.out_dim = in_dim, out_dim
        self.params = {
            "eps": np.array([eps]),
            "W1": glorot(rng, in_dim, out_dim),
            "b1": np.zeros(out_dim),
            "slope": np.array([PRELU_INIT]),
            "W2": glorot(rng, out_dim, out_dim),
            "b2": np.zeros(out_dim),
        }

    def forward(self, x: np.ndarray, adj: NormalizedAdjacency) -> np.ndarray:
        self._check_input(x, self.in_dim)
        p = self.params
        agg = (1.0 + p["eps"][0]) * x + adj.raw @ x
        z1 = agg @ p["W1"] + p["b1"]
        a1 = prelu(z1, p["slope"][0])
        self._cache = (x, adj, agg, z1, a1)
        return a1 @ p["W2"] + p["b2"]

    def pre_activation(self, x: np.ndarray, adj: NormalizedAdjacency) -> np.ndarray:
        return (1.0 + self.params["eps"][0]) * x + adj.raw @ x

    def backward(self, g: np.ndarray) -> np.ndarray:
        x, adj, agg, z1, a1 = self._take_cache()
        p = self.params
        gz1, gslope = prelu_backward(g @ p["W2"].T, z1, p["slope"][0])
        gagg = gz1 @ p["W1"].T
        self.grads = {
            "eps": np.array([np.sum(gagg * x)]),
            "W1": agg.T @ gz1,
            "b1": gz1.sum(axis=0),
            "slope": np.array([gslope]),
            "W2": a1.T @ g,
            "b2": g.sum(axis=0),
        }
        return (1.0 + p["eps"][0]) * gagg + adj.raw_t @ gagg


class GATConv(Layer):
    """Multi-head attention over N(i) + {i}; heads concatenated, then PReLU.

    Score for pair (i, j) and head k: LeakyReLU(a_k . [W_k h_i || W_k h_j]),
    split here into a center part ``att_src`` and a neighbor part ``att_dst``.
    """

    graph_op = True

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, heads: int = 4):
        super().__init__()
        if heads < 1 or out_dim % heads:
            raise DimMismatch(f"out_dim {out_dim} not divisible into {heads} heads")
        self.in_dim, self.out_dim, self.heads = in_dim, out_dim, heads
        self.head_dim = out_dim // heads
        f = self.head_dim
        self.params = {
            "W": glorot(rng, in_dim, out_dim),
            "att_src": glorot(rng, heads, f, shape=(heads, f)),
            "att_dst": glorot(rng, heads, f, shape=(heads, f)),
            "b": np.zeros(out_dim),
            "slope": np.array([PRELU_INIT]),
        }
        # column c of W h belongs to head _head_of[c]
        self._head_of = np.repeat(np.arange(heads), f)
        self.last_alpha: np.ndarray | None = None

    def _score_matrix(self) -> np.ndarray:
        """(out_dim, 2 * heads) block-diagonal map from W h to center/neighbor scores."""
        k = self.heads
        cols = np.arange(self.out_dim)
        mat = np.zeros((self.out_dim, 2 * k))
        mat[cols, self._head_of] = self.params["att_src"].ravel()
        mat[cols, k + self._head_of] = self.params["att_dst"].ravel()
        return mat

    def _softmax(self, z: np.ndarray, adj: NormalizedAdjacency, score_mat: np.ndarray):
        k = self.heads
        s = z @ score_mat
        pre = s[adj.center, :k] + s[adj.nbr, k:]
        score = prelu(pre, LEAKY_SLOPE)
        ex = np.exp(score - adj.max_by_center(score)[adj.center])
        alpha = ex / adj.sum_by_center(ex)[adj.center]
        return alpha, pre

    def attention(self, x: np.ndarray, adj: NormalizedAdjacency) -> np.ndarray:
        """Attention coefficients, shape (pairs, heads), aligned with adj.center/nbr."""
        return self._softmax(x @ self.params["W"], adj, self._score_matrix())[0]

    def _stack(self, h: np.ndarray) -> np.ndarray:
        """(n, heads * f) -> (heads * n, f), head-major, for the block-diagonal product."""
        n = h.shape[0]
        return h.reshape(n, self.heads, self.head_dim).transpose(1, 0, 2).reshape(-1, self.head_dim)

    def _unstack(self, h: np.ndarray) -> np.ndarray:
        n = h.shape[0] // self.heads
        return h.reshape(self.heads, n, self.head_dim).transpose(1, 0, 2).reshape(n, -1)

    def forward(self, x: np.ndarray, adj: NormalizedAdjacency) -> np.ndarray:
        self._check_input(x, self.in_dim)
        p = self.params
        z = x @ p["W"]
        score_mat = self._score_matrix()
        alpha, pre = self._softmax(z, adj, score_mat)
        mat = adj.pair_matrix(alpha)
        out = self._unstack(mat @ self._stack(z)) + p["b"]
        self.last_alpha = alpha
        self._cache = (x, adj, z, score_mat, alpha, mat, pre, out)
        return prelu(out, p["slope"][0])

    def backward(self, g: np.ndarray) -> np.ndarray:
        x, adj, z, score_mat, alpha, mat, pre, out = self._take_cache()
        p = self.params
        k, f = self.heads, self.head_dim
        gout, gslope = prelu_backward(g, out, p["slope"][0])

        galpha = np.einsum("pkf,pkf->pk", gout[adj.center].reshape(-1, k, f), z[adj.nbr].reshape(-1, k, f))
        gz = self._unstack(mat.T @ self._stack(gout))

        weighted = adj.sum_by_center(alpha * galpha)
        gscore = alpha * (galpha - weighted[adj.center])
        gpre = prelu_backward(gscore, pre, LEAKY_SLOPE)[0]
        gs = np.hstack([adj.sum_by_center(gpre), adj.sum_by_nbr(gpre)])
        gz += gs @ score_mat.T
        gmat = z.T @ gs
        cols = np.arange(self.out_dim)

        self.grads = {
            "W": x.T @ gz,
            "att_src": gmat[cols, self._head_of].reshape(k, f),
            "att_dst": gmat[cols, k + self._head_of].reshape(k, f),
            "b": gout.sum(axis=0),
            "slope": np.array([gslope]),
        }
        return gz @ p["W"].T
