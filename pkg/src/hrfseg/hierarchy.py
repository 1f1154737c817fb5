"""Saliencies, partitions and ultrametric contour maps from a valued tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from hrfseg.errors import ValidationError
from hrfseg.graph_core import Tree, UnionFind
from hrfseg.raster_io import dense_relabel
from hrfseg.sws import HierarchyValuation


@dataclass(frozen=True)
class Ultrametric:
    """Saliency ``d`` for region pairs ``(u[i], v[i])`` with ``u < v``."""

    u: np.ndarray
    v: np.ndarray
    d: np.ndarray

    def lookup(self, a, b) -> np.ndarray:
        """Vectorised saliency of pairs; raises if a pair is missing."""
        a, b = np.asarray(a), np.asarray(b)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        n = int(max(self.v.max(initial=0), hi.max(initial=0))) + 1
        keys = self.u * n + self.v
        order = np.argsort(keys)
        query = lo * n + hi
        pos = np.searchsorted(keys, query, sorter=order)
        pos = np.minimum(pos, keys.size - 1)
        found = keys[order[pos]] == query if keys.size else np.zeros(query.shape, bool)
        if not np.all(found):
            i = int(np.flatnonzero(~found.ravel())[0])
            raise ValidationError(
                f"no saliency for adjacency ({lo.ravel()[i]}, {hi.ravel()[i]})"
            )
        return self.d[order[pos]]


def ultrametric(tree: Tree, valuation: HierarchyValuation, pairs) -> Ultrametric:
    """Max cut probability on the tree path joining each pair.

    Resolved by a sweep over edges sorted by ``(p, edge_id)``: a pair gets the
    value of the edge that first connects its endpoints. Pending pairs move
    from the smaller component to the larger one on every union.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    d = np.zeros(len(pairs))
    resolved = lo == hi
    pending = [[] for _ in range(tree.node_count)]
    for i in np.flatnonzero(~resolved).tolist():
        pending[int(lo[i])].append(i)
        pending[int(hi[i])].append(i)

    lo_l, hi_l = lo.tolist(), hi.tolist()
    uf = UnionFind(tree.node_count)
    p = valuation.p.tolist()
    u, v = tree.u.tolist(), tree.v.tolist()
    for e in tree.sweep_order(valuation.p).tolist():
        ra, rb = uf.find(u[e]), uf.find(v[e])
        small, big = (ra, rb) if len(pending[ra]) <= len(pending[rb]) else (rb, ra)
        keep = []
        for i in pending[small]:
            if resolved[i]:
                continue
            other = hi_l[i] if uf.find(lo_l[i]) == small else lo_l[i]
            if uf.find(other) == big:
                d[i] = p[e]
                resolved[i] = True
            else:
                keep.append(i)
        merged = pending[big]
        merged.extend(keep)
        pending[small] = []
        root = uf.union(ra, rb)
        pending[big] = []
        pending[root] = merged
    return Ultrametric(lo, hi, d)


def _project(node_labels: np.ndarray, fine_labels) -> np.ndarray:
    if fine_labels is None:
        return dense_relabel(node_labels)
    return dense_relabel(node_labels[np.asarray(fine_labels)])


def cut_threshold(tree: Tree, valuation: HierarchyValuation, threshold: float, fine_labels=None):
    """Partition obtained by cutting every tree edge with ``p > threshold``.

    Without ``fine_labels`` the result labels tree nodes; with them, pixels.
    """
    uf = UnionFind(tree.node_count)
    for a, b, pe in zip(tree.u.tolist(), tree.v.tolist(), valuation.p.tolist()):
        if not pe > threshold:
            uf.union(a, b)
    return _project(uf.labels(), fine_labels)


def cut_k(tree: Tree, valuation: HierarchyValuation, k: int, fine_labels=None):
    """Exactly ``k`` regions: cut the ``k - 1`` edges with largest ``(p, edge_id)``."""
    n = tree.node_count
    if not 1 <= k <= n:
        raise ValidationError(f"k={k} outside [1, {n}]")
    uf = UnionFind(n)
    u, v = tree.u.tolist(), tree.v.tolist()
    for e in tree.sweep_order(valuation.p)[: n - k].tolist():
        uf.union(u[e], v[e])
    return _project(uf.labels(), fine_labels)


def marker_cut(tree: Tree, valuation: HierarchyValuation, markers, fine_labels=None):
    """One region per marker: sweep by ``(p, edge_id)``, refusing unions of two marked components."""
    markers = sorted(set(int(m) for m in markers))
    if not markers:
        raise ValidationError("marker set is empty")
    if markers[0] < 0 or markers[-1] >= tree.node_count:
        raise ValidationError("marker outside the tree's node range")
    marked = np.zeros(tree.node_count)
    marked[markers] = 1
    uf = UnionFind(tree.node_count, marked=marked)
    u, v = tree.u.tolist(), tree.v.tolist()
    for e in tree.sweep_order(valuation.p).tolist():
        if uf.stat("marked", u[e]) and uf.stat("marked", v[e]):
            continue
        uf.union(u[e], v[e])
    return _project(uf.labels(), fine_labels)


def adjacency_pairs(labels) -> np.ndarray:
    """Distinct 4-adjacent label pairs ``(lo, hi)``, sorted."""
    labels = np.asarray(labels, dtype=np.int64)
    a = np.concatenate([labels[:, :-1].ravel(), labels[:-1, :].ravel()])
    b = np.concatenate([labels[:, 1:].ravel(), labels[1:, :].ravel()])
    diff = a != b
    pairs = np.stack([np.minimum(a[diff], b[diff]), np.maximum(a[diff], b[diff])], 1)
    return np.unique(pairs, axis=0) if pairs.size else pairs.reshape(0, 2)


def render_ucm(labels, saliencies: Ultrametric) -> np.ndarray:
    """Rasterise saliencies on the (2H+1) x (2W+1) inter-pixel grid.

    Pixel ``(i, j)`` sits at ``(2i+1, 2j+1)``; the cell between two pixels of
    different regions carries their saliency; corner cells ``(even, even)``
    take the max of their incident boundary cells.
    """
    labels = np.asarray(labels, dtype=np.int64)
    h, w = labels.shape
    grid = np.zeros((2 * h + 1, 2 * w + 1))

    horiz = labels[:, :-1] != labels[:, 1:]
    if horiz.any():
        rows, cols = np.nonzero(horiz)
        grid[2 * rows + 1, 2 * cols + 2] = saliencies.lookup(
            labels[rows, cols], labels[rows, cols + 1]
        )
    vert = labels[:-1, :] != labels[1:, :]
    if vert.any():
        rows, cols = np.nonzero(vert)
        grid[2 * rows + 2, 2 * cols + 1] = saliencies.lookup(
            labels[rows, cols], labels[rows + 1, cols]
        )

    corners = grid[0::2, 0::2]
    padded = np.pad(grid, 1)
    # neighbours of corner (2i, 2j) in padded coordinates (2i+1, 2j+1)
    up = padded[0:-2:2, 1:-1:2]
    down = padded[2::2, 1:-1:2]
    left = padded[1:-1:2, 0:-2:2]
    right = padded[1:-1:2, 2::2]
    corners[...] = np.maximum.reduce([up, down, left, right])
    return grid


def threshold_ucm(ucm, threshold: float) -> np.ndarray:
    """Pixel partition whose 4-neighbours join when their boundary cell is ``<= threshold``."""
    ucm = np.asarray(ucm)
    h, w = (ucm.shape[0] - 1) // 2, (ucm.shape[1] - 1) // 2
    idx = np.arange(h * w).reshape(h, w)
    join_h = ucm[1::2, 2:-1:2] <= threshold
    join_v = ucm[2:-1:2, 1::2] <= threshold
    src = np.concatenate([idx[:, :-1][join_h], idx[:-1, :][join_v]])
    dst = np.concatenate([idx[:, 1:][join_h], idx[1:, :][join_v]])
    graph = sparse.coo_matrix((np.ones(src.size), (src, dst)), shape=(h * w, h * w))
    _, comp = csgraph.connected_components(graph, directed=False)
    return dense_relabel(comp.reshape(h, w))
