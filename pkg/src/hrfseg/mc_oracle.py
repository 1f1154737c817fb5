"""Monte-Carlo stochastic watershed, used to check the closed-form valuations.

Markers are simulated per fine region: region ``r`` receives a
Poisson(measure[r]) count. Random numbers come from numpy's PCG64 bit
generator, whose streams are fixed by the seed on every platform. Trials are
grouped in fixed-size blocks; block ``b`` draws from
``PCG64(SeedSequence([seed, b]))`` so blocks can run in any order.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from hrfseg.graph_core import Tree, UnionFind
from hrfseg.sws import DensityField, tie_batches

BLOCK = 4096
# largest rate handed to a single inversion; bigger rates are split into a
# sum of independent pieces so exp(-rate) stays far from underflow
MAX_PIECE_RATE = 16.0


def _generator(seed: int, block: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, block])))


def _poisson_piece(rng: np.random.Generator, lam: np.ndarray) -> np.ndarray:
    """Poisson draws by inversion with sequential search of the CDF."""
    u = rng.random(lam.shape)
    k = np.zeros(lam.shape, dtype=np.int64)
    prob = np.exp(-lam)
    cdf = prob.copy()
    active = u > cdf
    while active.any():
        idx = np.nonzero(active)
        k[idx] += 1
        prob[idx] *= lam[idx] / k[idx]
        cdf[idx] += prob[idx]
        # guard against a cdf that rounds to just below 1
        active = (u > cdf) & (prob > 0)
    return k


def poisson(rng: np.random.Generator, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(lam < 0):
        raise ValueError("Poisson rates must be non-negative")
    pieces = np.maximum(np.ceil(lam / MAX_PIECE_RATE), 1.0)
    out = np.zeros(lam.shape, dtype=np.int64)
    for j in range(int(pieces.max(initial=1))):
        rate = np.where(j < pieces, lam / pieces, 0.0)
        out += _poisson_piece(rng, rate)
    return out


def sample_markers(density: DensityField, seed: int, size: int | None = None) -> np.ndarray:
    """Marker count per region; ``size`` independent draws stacked on axis 0."""
    rng = _generator(seed)
    shape = density.measure.shape if size is None else (size,) + density.measure.shape
    return poisson(rng, np.broadcast_to(density.measure, shape))


@dataclass(frozen=True)
class TrialReport:
    trials: int
    edge_id: np.ndarray
    u: np.ndarray
    v: np.ndarray
    cut_count: np.ndarray
    p_closed_form: np.ndarray | None = None

    @property
    def frequency(self) -> np.ndarray:
        return self.cut_count / self.trials

    @property
    def standard_error(self) -> np.ndarray:
        f = self.frequency
        return np.sqrt(f * (1.0 - f) / self.trials)

    def with_closed_form(self, p) -> "TrialReport":
        return TrialReport(self.trials, self.edge_id, self.u, self.v, self.cut_count, np.asarray(p))

    def deviations(self) -> np.ndarray:
        """|frequency - p| in units of the binomial standard error at ``p``."""
        p = self.p_closed_form
        tol = np.sqrt(p * (1.0 - p) / self.trials)
        dev = np.abs(self.frequency - p)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(tol > 0, dev / tol, np.where(dev > 0, np.inf, 0.0))

    def passes(self, n_sigma: float = 4.0) -> bool:
        return bool(np.all(self.deviations() <= n_sigma))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("edge_id,u,v,p_closed_form,frequency,std_err\n")
        p = self.p_closed_form if self.p_closed_form is not None else [math.nan] * len(self.u)
        for row in zip(
            self.edge_id.tolist(),
            self.u.tolist(),
            self.v.tolist(),
            np.asarray(p).tolist(),
            self.frequency.tolist(),
            self.standard_error.tolist(),
        ):
            buf.write("%d,%d,%d,%.17g,%.17g,%.17g\n" % row)
        return buf.getvalue()


def side_memberships(tree: Tree):
    """Sparse (edges x nodes) indicator matrices of the two sides of each edge.

    Sides are the components of ``s`` and ``t`` using only edges strictly
    lighter than the edge itself.
    """
    uf = UnionFind(tree.node_count)
    members = {i: [i] for i in range(tree.node_count)}
    u, v = tree.u.tolist(), tree.v.tolist()
    rows_s, cols_s, rows_t, cols_t = [], [], [], []
    for batch in tie_batches(tree):
        for e in batch:
            ms, mt = members[uf.find(u[e])], members[uf.find(v[e])]
            rows_s.extend([e] * len(ms))
            cols_s.extend(ms)
            rows_t.extend([e] * len(mt))
            cols_t.extend(mt)
        for e in batch:
            ra, rb = uf.find(u[e]), uf.find(v[e])
            if ra == rb:
                continue
            merged = members.pop(ra) + members.pop(rb)
            members[uf.union(ra, rb)] = merged
    shape = (tree.edge_count, tree.node_count)
    side_s = sparse.csr_matrix((np.ones(len(rows_s)), (rows_s, cols_s)), shape=shape)
    side_t = sparse.csr_matrix((np.ones(len(rows_t)), (rows_t, cols_t)), shape=shape)
    return side_s, side_t


def _modulated_nonempty(rng, side_count, side_measure, chi):
    """Whether a side holds a marker at rate chi * measure, given its base counts.

    Only emptiness decides a cut, so each case draws one uniform against the
    exact probability of an empty side. chi <= 1 thins the base markers, each
    kept with probability chi: empty with probability (1 - chi) ** count.
    chi > 1 superposes an independent Poisson((chi - 1) * measure) batch onto
    the base markers: that batch is empty with probability exp(-(chi - 1) * measure).
    """
    u = rng.random(side_count.shape)
    thin = chi <= 1.0
    p_empty_thin = (1.0 - np.minimum(chi, 1.0)) ** side_count
    p_empty_extra = np.exp(-np.maximum(chi - 1.0, 0.0) * side_measure)
    return np.where(thin, u >= p_empty_thin, (side_count > 0) | (u >= p_empty_extra))


def estimate_cut_frequencies(
    tree: Tree,
    density: DensityField,
    trials: int,
    seed: int,
    chi=None,
) -> TrialReport:
    """Count, over ``trials`` marker draws, how often each tree edge is cut.

    An edge is cut when both of its sides hold at least one marker. ``chi``
    (one factor per edge) rescales the marker rate seen by that edge.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    side_s, side_t = side_memberships(tree)
    if chi is not None:
        chi = np.asarray(chi, dtype=np.float64)
        measure_s = side_s @ density.measure
        measure_t = side_t @ density.measure
    cut = np.zeros(tree.edge_count, dtype=np.int64)
    for block, start in enumerate(range(0, trials, BLOCK)):
        rng = _generator(seed, block)
        n = min(BLOCK, trials - start)
        counts = poisson(rng, np.broadcast_to(density.measure, (n, tree.node_count)))
        in_s = np.rint(side_s @ counts.T).astype(np.int64).T
        in_t = np.rint(side_t @ counts.T).astype(np.int64).T
        if chi is None:
            cut += np.count_nonzero((in_s > 0) & (in_t > 0), axis=0)
        else:
            hit_s = _modulated_nonempty(rng, in_s, measure_s, chi)
            hit_t = _modulated_nonempty(rng, in_t, measure_t, chi)
            cut += np.count_nonzero(hit_s & hit_t, axis=0)
    return TrialReport(trials, tree.edge_id.copy(), tree.u.copy(), tree.v.copy(), cut)
