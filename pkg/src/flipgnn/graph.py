"""Immutable CSR graph representation, degree renormalization, and k-hop queries.

The propagation operator used by the convolutional models is the
self-loop-augmented symmetric renormalization

    A_hat = D_tilde^{-1/2} (A + I) D_tilde^{-1/2},

where D_tilde is the degree matrix of A + I. Every undirected edge is stored
in both directions; column indices are sorted within each row so that sparse
products accumulate in a fixed (ascending column) order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Graph:
    """Undirected graph in CSR form.

    ``m`` counts undirected edges; the CSR arrays hold both directions, so
    ``len(col_indices) == 2 * m``. Unit edge values stand for the raw
    adjacency.
    """

    n: int
    m: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    edge_values: np.ndarray

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.edge_values, self.col_indices, self.row_offsets), shape=(self.n, self.n)
        )

    def neighbors(self, u: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[u] : self.row_offsets[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)


@dataclass(frozen=True)
class NormalizedGraph:
    """Renormalized propagation matrix in the same CSR layout as ``Graph``.

    Self-loops are always present, so every diagonal entry exists and is
    positive; all stored values lie in (0, 1].
    """

    n: int
    m: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    edge_values: np.ndarray
    _csr: sp.csr_matrix = field(repr=False, compare=False, default=None)

    def to_csr(self) -> sp.csr_matrix:
        if self._csr is None:
            csr = sp.csr_matrix(
                (self.edge_values, self.col_indices, self.row_offsets), shape=(self.n, self.n)
            )
            object.__setattr__(self, "_csr", csr)
        return self._csr


@dataclass(frozen=True)
class NodeSplit:
    """Disjoint train/val/test node-id sets (sorted int64 arrays)."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            ids = np.asarray(getattr(self, name), dtype=np.int64)
            object.__setattr__(self, name, np.unique(ids))
        if self.train.size == 0:
            raise ValueError("train split must be non-empty")
        joined = np.concatenate([self.train, self.val, self.test])
        if np.unique(joined).size != joined.size:
            raise ValueError("train/val/test splits overlap")

    def validate_against(self, n: int) -> None:
        joined = np.concatenate([self.train, self.val, self.test])
        if joined.size and (joined.min() < 0 or joined.max() >= n):
            raise ValueError(f"split node id out of range for n={n}")


def build_graph(edges, n: int) -> Graph:
    """Build a symmetric CSR graph from undirected (u, v) pairs.

    Duplicate pairs (in either orientation) are merged. Self-loops are
    rejected; renormalization adds them later, and rejecting keeps the
    undirected edge count well-defined.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    pairs = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            raise ValueError(f"self-loop ({u}, {u}) not allowed in input edges")
        pairs.add((min(u, v), max(u, v)))
    m = len(pairs)
    if m == 0:
        offsets = np.zeros(n + 1, dtype=np.int64)
        return Graph(
            n=n,
            m=0,
            row_offsets=offsets,
            col_indices=np.zeros(0, dtype=np.int64),
            edge_values=np.zeros(0, dtype=np.float64),
        )
    arr = np.array(sorted(pairs), dtype=np.int64)
    rows = np.concatenate([arr[:, 0], arr[:, 1]])
    cols = np.concatenate([arr[:, 1], arr[:, 0]])
    adj = sp.csr_matrix(
        (np.ones(rows.size, dtype=np.float64), (rows, cols)), shape=(n, n)
    )
    adj.sort_indices()
    return Graph(
        n=n,
        m=m,
        row_offsets=adj.indptr.astype(np.int64),
        col_indices=adj.indices.astype(np.int64),
        edge_values=adj.data,
    )


def renormalize(g: Graph) -> NormalizedGraph:
    """Return D_tilde^{-1/2} (A + I) D_tilde^{-1/2} with self-loops added.

    An isolated node ends up with a single diagonal entry equal to 1.
    """
    a = g.to_csr() + sp.eye(g.n, format="csr")
    deg = np.asarray(a.sum(axis=1)).ravel()
    d_inv_sqrt = 1.0 / np.sqrt(deg)
    norm = sp.diags(d_inv_sqrt) @ a @ sp.diags(d_inv_sqrt)
    norm = norm.tocsr()
    norm.sort_indices()
    return NormalizedGraph(
        n=g.n,
        m=g.m,
        row_offsets=norm.indptr.astype(np.int64),
        col_indices=norm.indices.astype(np.int64),
        edge_values=norm.data,
        _csr=norm,
    )


def spmm(g: NormalizedGraph, h: np.ndarray) -> np.ndarray:
    """Sparse-dense product A_hat @ H; rows accumulate in ascending column order."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != g.n:
        raise ValueError(f"H must be ({g.n}, k), got {h.shape}")
    return g.to_csr() @ h


def khop_nodes(g: Graph, seeds, k: int) -> np.ndarray:
    """Nodes reachable from ``seeds`` in at most ``k`` hops (seeds included)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    seeds = np.unique(np.asarray(list(seeds), dtype=np.int64))
    if seeds.size and (seeds.min() < 0 or seeds.max() >= g.n):
        raise ValueError("seed node id out of range")
    reached = np.zeros(g.n, dtype=bool)
    reached[seeds] = True
    frontier = seeds
    adj = g.to_csr()
    for _ in range(k):
        if frontier.size == 0:
            break
        indicator = np.zeros(g.n, dtype=np.float64)
        indicator[frontier] = 1.0
        touched = (adj @ indicator) > 0
        frontier = np.flatnonzero(touched & ~reached)
        reached |= touched
    return np.flatnonzero(reached)
