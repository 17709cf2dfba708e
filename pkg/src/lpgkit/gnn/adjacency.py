"""Propagation operators derived from a neighbor-count matrix."""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp


class NormalizedAdjacency:
    """Everything the three layer types need to propagate over one graph.

    Built from a CSR neighbor-count structure whose row i lists N(i).

    * ``norm``: D^-1/2 (A + I) D^-1/2 with exactly one self-loop per vertex
      (an explicit self-loop edge is not counted twice).
    * ``raw``: neighbor multiplicities, used by GIN's sum.
    * ``center``/``nbr``: attention pairs (i, j) for j in N(i) + {i}, sorted
      by i then j. Every vertex owns at least its self pair, so segment sums
      by center or by neighbor never see an empty segment.

    Operators are built on first use, so a GIN batch never pays for the
    attention index and vice versa.
    """

    def __init__(
        self,
        indptr: np.ndarray,
        indices: np.ndarray,
        data: np.ndarray | None = None,
        symmetric: bool = False,
    ):
        self.n = len(indptr) - 1
        # a symmetric structure lets the transposed operators alias the originals
        self.symmetric = symmetric
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = np.ones(len(self.indices)) if data is None else np.asarray(data, dtype=np.float64)

    @classmethod
    def from_matrix(cls, adj: sp.spmatrix) -> "NormalizedAdjacency":
        adj = sp.csr_matrix(adj, dtype=np.float64)
        adj.sum_duplicates()
        adj.sort_indices()
        symmetric = adj.shape[0] == adj.shape[1] and (adj != adj.T).nnz == 0
        return cls(adj.indptr, adj.indices, adj.data, symmetric)

    @cached_property
    def raw(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    @cached_property
    def raw_t(self) -> sp.spmatrix:
        return self.raw if self.symmetric else self.raw.T

    @cached_property
    def _with_loops(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        off = rows != self.indices
        loop = np.arange(self.n)
        rows = np.concatenate([rows[off], loop])
        cols = np.concatenate([self.indices[off], loop])
        data = np.concatenate([self.data[off], np.ones(self.n)])
        order = np.lexsort((cols, rows))
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.n), out=indptr[1:])
        return indptr, cols[order], data[order]

    @cached_property
    def norm(self) -> sp.csr_matrix:
        indptr, cols, data = self._with_loops
        deg = np.add.reduceat(data, indptr[:-1]) if self.n else np.zeros(0)
        inv_sqrt = 1.0 / np.sqrt(deg)
        weights = data * inv_sqrt[self.center] * inv_sqrt[cols]
        return sp.csr_matrix((weights, cols, indptr), shape=(self.n, self.n))

    @cached_property
    def norm_t(self) -> sp.spmatrix:
        return self.norm if self.symmetric else self.norm.T

    @cached_property
    def center(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self._with_loops[0]))

    @property
    def nbr(self) -> np.ndarray:
        return self._with_loops[1]

    @property
    def seg_starts(self) -> np.ndarray:
        return self._with_loops[0][:-1]

    @property
    def n_pairs(self) -> int:
        return len(self.nbr)

    def _stacked_pattern(self, heads: int) -> tuple[np.ndarray, np.ndarray]:
        cache = self.__dict__.setdefault("_stacked", {})
        if heads not in cache:
            indptr, cols, _ = self._with_loops
            offsets = np.arange(heads) * self.n
            big_cols = (cols[None, :] + offsets[:, None]).ravel()
            big_ptr = np.concatenate([indptr[:-1] + h * len(cols) for h in range(heads)] + [[heads * len(cols)]])
            cache[heads] = (big_ptr, big_cols)
        return cache[heads]

    def pair_matrix(self, pair_values: np.ndarray) -> sp.csr_matrix:
        """Block-diagonal sparse matrix with one (n, n) block per column of
        ``pair_values`` (pairs x heads); block h holds head h's pair values."""
        heads = pair_values.shape[1]
        indptr, cols = self._stacked_pattern(heads)
        size = heads * self.n
        return sp.csr_matrix((pair_values.T.ravel(), cols, indptr), shape=(size, size))

    @cached_property
    def _center_scatter(self) -> sp.csr_matrix:
        # (n, pairs) 0/1 matrix; a sparse product beats reduceat on wide rows
        indptr = self._with_loops[0]
        return sp.csr_matrix((np.ones(self.n_pairs), np.arange(self.n_pairs), indptr), shape=(self.n, self.n_pairs))

    @cached_property
    def _nbr_scatter(self) -> sp.csr_matrix:
        order = np.argsort(self.nbr, kind="stable")
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.nbr, minlength=self.n), out=indptr[1:])
        return sp.csr_matrix((np.ones(self.n_pairs), order, indptr), shape=(self.n, self.n_pairs))

    def sum_by_center(self, pair_values: np.ndarray) -> np.ndarray:
        """Sum pair rows into their center vertex (rows must follow pair order)."""
        return self._center_scatter @ pair_values

    def max_by_center(self, pair_values: np.ndarray) -> np.ndarray:
        return np.maximum.reduceat(pair_values, self.seg_starts, axis=0)

    def sum_by_nbr(self, pair_values: np.ndarray) -> np.ndarray:
        """Sum pair rows into their neighbor vertex."""
        return self._nbr_scatter @ pair_values


def induced_subgraph(adj: NormalizedAdjacency, nodes: np.ndarray) -> NormalizedAdjacency:
    """Operators for the subgraph induced by sorted vertex positions ``nodes``."""
    nodes = np.asarray(nodes, dtype=np.int64)
    pos = np.full(adj.n, -1, dtype=np.int64)
    pos[nodes] = np.arange(len(nodes))
    starts = adj.indptr[nodes]
    lens = adj.indptr[nodes + 1] - starts
    total = int(lens.sum())
    offsets = np.repeat(starts - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
    flat = np.arange(total) + offsets
    cols = pos[adj.indices[flat]]
    keep = cols >= 0
    rows = np.repeat(np.arange(len(nodes)), lens)[keep]
    indptr = np.zeros(len(nodes) + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=len(nodes)), out=indptr[1:])
    return NormalizedAdjacency(indptr, cols[keep], adj.data[flat][keep], adj.symmetric)


def build_normalized_adjacency(graph) -> NormalizedAdjacency:
    """Propagation operators for a frozen PropertyGraph (or a scipy matrix)."""
    if sp.issparse(graph):
        return NormalizedAdjacency.from_matrix(graph)
    return NormalizedAdjacency.from_matrix(graph.adjacency_matrix())


def dense_normalized(adj: np.ndarray) -> np.ndarray:
    """Dense reference for tests and tiny graphs."""
    a = np.array(adj, dtype=np.float64)
    np.fill_diagonal(a, 0.0)
    a += np.eye(len(a))
    d = a.sum(axis=1)
    return a / np.sqrt(np.outer(d, d))
