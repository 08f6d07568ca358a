"""Hypergraph data structures shared by every other module.

A hypergraph is N vertices plus a list of hyperedges, each a set of
distinct vertex ids.  Edges are stored as sorted tuples so that equality
and duplicate detection are cheap.  All types here are immutable after
construction and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Hypergraph:
    """N vertices and M hyperedges (sorted tuples of distinct 0-based ids)."""

    num_vertices: int
    edges: tuple[tuple[int, ...], ...]
    uniform_k: Optional[int] = None

    @staticmethod
    def from_edge_lists(num_vertices: int, edges: Sequence[Sequence[int]]) -> "Hypergraph":
        canon = tuple(tuple(sorted(e)) for e in edges)
        sizes = {len(e) for e in canon}
        uniform_k = sizes.pop() if len(sizes) == 1 else None
        return Hypergraph(num_vertices, canon, uniform_k)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_sizes(self) -> np.ndarray:
        return np.array([len(e) for e in self.edges], dtype=int)


@dataclass(frozen=True)
class LabelAssignment:
    """Per-vertex group label in [0, num_groups)."""

    labels: np.ndarray
    num_groups: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        object.__setattr__(self, "labels", labels)
        if self.num_groups < 2:
            raise ValueError("num_groups must be >= 2")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_groups):
            raise ValueError("label out of range")

    def __len__(self) -> int:
        return len(self.labels)

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_groups)


@dataclass(frozen=True)
class DirectedEdgeIndex:
    """Flat enumeration of the directed pairs (vertex -> incident hyperedge).

    Index t runs over all (i, mu) with i in edge mu, ordered by edge then by
    position inside the sorted edge.  This is the row/column space of the
    non-backtracking operator.
    """

    pairs: tuple[tuple[int, int], ...]  # (vertex, edge) per flat index
    lookup: dict = field(repr=False, default_factory=dict)

    @staticmethod
    def build(h: Hypergraph) -> "DirectedEdgeIndex":
        pairs = []
        for mu, e in enumerate(h.edges):
            for i in e:
                pairs.append((i, mu))
        lookup = {p: t for t, p in enumerate(pairs)}
        return DirectedEdgeIndex(tuple(pairs), lookup)

    def __len__(self) -> int:
        return len(self.pairs)

    def index(self, vertex: int, edge: int) -> int:
        return self.lookup[(vertex, edge)]


def validate(h: Hypergraph) -> Optional[str]:
    """Return None if the hypergraph is well formed, else the first violation."""
    seen = set()
    for mu, e in enumerate(h.edges):
        if len(set(e)) != len(e):
            return f"duplicate vertex in edge {mu}"
        for i in e:
            if not (0 <= i < h.num_vertices):
                return f"vertex id {i} out of range in edge {mu}"
        if tuple(e) != tuple(sorted(e)):
            return f"edge {mu} not stored in sorted order"
        if e in seen:
            return f"duplicate hyperedge {e}"
        seen.add(e)
        if h.uniform_k is not None and len(e) != h.uniform_k:
            return f"edge {mu} has size {len(e)}, expected uniform size {h.uniform_k}"
    return None


def degrees(h: Hypergraph) -> np.ndarray:
    """Per-vertex degree d_i = number of hyperedges containing i."""
    d = np.zeros(h.num_vertices, dtype=int)
    for e in h.edges:
        for i in e:
            d[i] += 1
    return d


def incidence(h: Hypergraph) -> sp.csr_matrix:
    """N x M 0/1 incidence matrix H with H[i, mu] = 1 iff i is in edge mu."""
    rows, cols = [], []
    for mu, e in enumerate(h.edges):
        rows.extend(e)
        cols.extend([mu] * len(e))
    data = np.ones(len(rows), dtype=int)
    return sp.csr_matrix((data, (rows, cols)), shape=(h.num_vertices, h.num_edges))


def adjacency(h: Hypergraph, dense_cap: int = 5000) -> sp.csr_matrix:
    """Symmetric adjacency: A_ij = number of hyperedges containing both i and j.

    Stored sparse; use ``.toarray()`` only below desk scale (dense_cap kept as
    the documented limit for dense materialization elsewhere).
    """
    rows, cols = [], []
    for e in h.edges:
        for a in range(len(e)):
            for b in range(a + 1, len(e)):
                rows.extend((e[a], e[b]))
                cols.extend((e[b], e[a]))
    data = np.ones(len(rows), dtype=int)
    A = sp.csr_matrix((data, (rows, cols)), shape=(h.num_vertices, h.num_vertices))
    A.sum_duplicates()
    return A


def save_hypergraph(h: Hypergraph, path: str) -> None:
    """Text format: line 1 is ``N M``; next M lines are the vertex ids of one edge."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{h.num_vertices} {h.num_edges}\n")
        for e in h.edges:
            f.write(" ".join(str(i) for i in e) + "\n")


def load_hypergraph(path: str) -> Hypergraph:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().split()
        n, m = int(first[0]), int(first[1])
        edges = []
        for _ in range(m):
            edges.append([int(t) for t in f.readline().split()])
    h = Hypergraph.from_edge_lists(n, edges)
    bad = validate(h)
    if bad is not None:
        raise ValueError(f"invalid hypergraph in {path}: {bad}")
    return h


def save_labels(labels: LabelAssignment, path: str) -> None:
    """Label file: one integer label per line, N lines."""
    with open(path, "w", encoding="utf-8") as f:
        for a in labels.labels:
            f.write(f"{a}\n")


def load_labels(path: str, num_groups: Optional[int] = None) -> LabelAssignment:
    with open(path, "r", encoding="utf-8") as f:
        vals = [int(line) for line in f if line.strip()]
    labels = np.array(vals, dtype=int)
    q = num_groups if num_groups is not None else int(labels.max()) + 1
    return LabelAssignment(labels, max(q, 2))
