"""Region adjacency graph, Kruskal MST and the union-find shared by all sweeps."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from hrfseg.errors import ValidationError


@dataclass(frozen=True)
class Rag:
    """Region adjacency graph.

    Edges are stored in canonical order: sorted by ``(min(u, v), max(u, v))``,
    so an edge's position is its ``edge_id``. ``u < v`` always holds.
    """

    node_count: int
    u: np.ndarray
    v: np.ndarray
    weight: np.ndarray
    boundary_length: np.ndarray
    pixel_count: np.ndarray = field(default=None)
    intensity_sum: np.ndarray = field(default=None)

    @property
    def edge_count(self) -> int:
        return int(self.u.size)

    @classmethod
    def from_edges(cls, node_count: int, edges) -> "Rag":
        """Build a graph from ``(u, v, weight)`` triples (in any order)."""
        edges = list(edges)
        lo = np.array([min(e[0], e[1]) for e in edges], dtype=np.int64)
        hi = np.array([max(e[0], e[1]) for e in edges], dtype=np.int64)
        w = np.array([e[2] for e in edges], dtype=np.float64)
        if np.any(lo == hi):
            raise ValueError("self-loops are not allowed")
        order = np.lexsort((hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        if np.any((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])):
            raise ValueError("duplicate edge")
        return cls(node_count, lo, hi, w, np.ones(lo.size, dtype=np.int64))

    def dump_edges(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["u", "v", "weight", "boundary_length"])
            for row in zip(
                self.u.tolist(),
                self.v.tolist(),
                self.weight.tolist(),
                self.boundary_length.tolist(),
            ):
                writer.writerow([row[0], row[1], repr(row[2]), row[3]])


@dataclass(frozen=True)
class Tree:
    """Spanning tree, edges sorted by ``edge_id``."""

    node_count: int
    u: np.ndarray
    v: np.ndarray
    weight: np.ndarray
    edge_id: np.ndarray

    @property
    def edge_count(self) -> int:
        return int(self.u.size)

    def sweep_order(self, values=None) -> np.ndarray:
        """Edge indices sorted by ``(values, edge_id)``; values default to weights."""
        values = self.weight if values is None else np.asarray(values)
        return np.lexsort((self.edge_id, values))

    def with_weights(self, weight) -> "Tree":
        return Tree(self.node_count, self.u, self.v, np.asarray(weight, float), self.edge_id)


def build_rag(labels, image) -> Rag:
    """RAG over 4-adjacency; weight is the absolute difference of mean intensities."""
    labels = np.asarray(labels, dtype=np.int64)
    image = np.asarray(image, dtype=np.float64)
    if labels.shape != image.shape:
        raise ValidationError(
            f"label map {labels.shape} and image {image.shape} differ in size"
        )
    n = int(labels.max()) + 1
    if n < 2:
        raise ValidationError("label map has a single region; RAG would have no edges")

    a = np.concatenate([labels[:, :-1].ravel(), labels[:-1, :].ravel()])
    b = np.concatenate([labels[:, 1:].ravel(), labels[1:, :].ravel()])
    diff = a != b
    lo = np.minimum(a[diff], b[diff])
    hi = np.maximum(a[diff], b[diff])
    keys, lengths = np.unique(lo * n + hi, return_counts=True)
    u, v = keys // n, keys % n

    counts = np.bincount(labels.ravel(), minlength=n)
    sums = np.bincount(labels.ravel(), weights=image.ravel(), minlength=n)
    means = sums / counts
    weight = np.abs(means[u] - means[v])
    return Rag(n, u, v, weight, lengths, counts, sums)


class UnionFind:
    """Union by rank with path halving.

    Optional per-node statistics (name -> sequence) are summed into the root
    on every union and read with :meth:`stat`.
    """

    def __init__(self, n: int, **stats):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.stats = {name: [float(x) for x in values] for name, values in stats.items()}

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        for values in self.stats.values():
            values[ra] += values[rb]
        return ra

    def stat(self, name: str, x: int) -> float:
        return self.stats[name][self.find(x)]

    def labels(self) -> np.ndarray:
        return np.array([self.find(i) for i in range(len(self.parent))], dtype=np.int64)


def connected_component_count(node_count: int, u, v) -> int:
    uf = UnionFind(node_count)
    for a, b in zip(np.asarray(u).tolist(), np.asarray(v).tolist()):
        uf.union(a, b)
    return len({uf.find(i) for i in range(node_count)})


def minimum_spanning_tree(rag: Rag) -> Tree:
    """Kruskal over edges sorted by ``(weight, edge_id)``."""
    n = rag.node_count
    order = np.lexsort((np.arange(rag.edge_count), rag.weight))
    uf = UnionFind(n)
    kept = []
    u, v = rag.u.tolist(), rag.v.tolist()
    for e in order.tolist():
        a, b = uf.find(u[e]), uf.find(v[e])
        if a != b:
            uf.union(a, b)
            kept.append(e)
            if len(kept) == n - 1:
                break
    if len(kept) != n - 1:
        comps = connected_component_count(n, rag.u, rag.v)
        raise ValidationError(f"graph is disconnected: {comps} connected components")
    kept = np.sort(np.array(kept, dtype=np.int64))
    return Tree(n, rag.u[kept], rag.v[kept], rag.weight[kept], kept)
