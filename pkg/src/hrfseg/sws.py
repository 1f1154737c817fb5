"""Closed-form stochastic watershed valuation of MST edges.

Markers follow a Poisson process whose expected count over a set of fine
regions is the sum of the regions' measures. Sweeping the tree edges by
increasing weight, an edge ``(s, t)`` is cut when both components hanging
from it (built from strictly lighter edges) receive at least one marker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from hrfseg.errors import ValidationError
from hrfseg.fine_partition import RegionPriorMeans
from hrfseg.graph_core import Tree, UnionFind


@dataclass(frozen=True)
class DensityField:
    """Expected marker count per fine region."""

    measure: np.ndarray

    @property
    def total(self) -> float:
        return math.fsum(self.measure.tolist())


@dataclass(frozen=True)
class HierarchyValuation:
    """Cut probability per tree edge, aligned with the tree's edge arrays."""

    p: np.ndarray
    weight: np.ndarray
    edge_id: np.ndarray


@dataclass(frozen=True)
class ChiParams:
    epsilon: float = 0.01
    mode: str = "none"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.mode not in ("none", "volume", "transition"):
            raise ValueError(f"unknown chi mode {self.mode!r}")


def _normalized(masses, n_markers) -> DensityField:
    # exact rationals, so proportional inputs give bitwise-identical output
    n_markers = Fraction(float(n_markers))
    total = sum(masses, Fraction(0))
    return DensityField(np.array([float(n_markers * m / total) for m in masses]))


def _check_markers(n_markers):
    if not n_markers > 0:
        raise ValidationError(f"expected marker count must be positive, got {n_markers}")


def uniform_density(labels, n_markers: float) -> DensityField:
    """Measure proportional to region area, summing to ``n_markers``."""
    _check_markers(n_markers)
    labels = np.asarray(labels)
    counts = np.bincount(labels.ravel(), minlength=int(labels.max()) + 1)
    return _normalized([Fraction(int(c)) for c in counts], n_markers)


def prior_density(means: RegionPriorMeans, n_markers: float) -> DensityField:
    """Measure proportional to the prior mass of each region (mean times area)."""
    _check_markers(n_markers)
    if not any(means.prior_mass):
        raise ValidationError("degenerate prior: every region has zero prior mass")
    return _normalized(list(means.prior_mass), n_markers)


def combine_priors(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"prior shapes differ: {a.shape} vs {b.shape}")
    return (a + b) / 2.0


def cut_probability(lam_s: float, lam_t: float, chi: float = 1.0) -> float:
    """P(both sides get at least one marker) at rates ``chi * lam``.

    Evaluated in the factorised form (1 - e^-a)(1 - e^-b), which equals the
    inclusion-exclusion expression because the measure is additive, is exactly
    0 when a side is empty and stays monotone in floating point.
    """
    return math.expm1(-chi * lam_s) * math.expm1(-chi * lam_t)


def cut_probability_inclusion_exclusion(lam_s: float, lam_t: float, chi: float = 1.0) -> float:
    """1 - P(s side empty) - P(t side empty) + P(both empty)."""
    return (
        1.0
        - math.exp(-chi * lam_s)
        - math.exp(-chi * lam_t)
        + math.exp(-chi * (lam_s + lam_t))
    )


def transition_chi(m_s, sd_s, m_t, sd_t, epsilon=0.01) -> float:
    """Modulation favouring foreground/background transitions between coherent regions."""
    return max(m_s, m_t) * (1.0 - min(m_s, m_t)) / (epsilon + sd_s * sd_t)


def _moments(uf: UnionFind, x: int):
    root = uf.find(x)
    count = uf.stats["count"][root]
    mean = uf.stats["prior_sum"][root] / count
    var = uf.stats["prior_sq"][root] / count - mean * mean
    return mean, math.sqrt(var) if var > 0.0 else 0.0


def tie_batches(tree: Tree):
    """Yield lists of edge indices sharing one weight, in sweep order."""
    w = tree.weight.tolist()
    order = tree.sweep_order().tolist()
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and w[order[j]] == w[order[i]]:
            j += 1
        yield order[i:j]
        i = j


def _sweep(tree: Tree, density: DensityField, chi_of_edge):
    stats = {"measure": density.measure}
    if chi_of_edge.needs_moments:
        stats.update(chi_of_edge.stats)
    uf = UnionFind(tree.node_count, **stats)
    measure = uf.stats["measure"]
    u, v = tree.u.tolist(), tree.v.tolist()
    p = np.zeros(tree.edge_count)
    chis = np.ones(tree.edge_count)
    for batch in tie_batches(tree):
        for e in batch:
            chi = chis[e] = chi_of_edge(e, uf)
            p[e] = cut_probability(measure[uf.find(u[e])], measure[uf.find(v[e])], chi)
        for e in batch:
            uf.union(u[e], v[e])
    return HierarchyValuation(p, tree.weight.copy(), tree.edge_id.copy()), chis


class _NoChi:
    needs_moments = False

    def __call__(self, e, uf):
        return 1.0


class _VolumeChi:
    needs_moments = False

    def __init__(self, tree):
        self.weight = tree.weight.tolist()

    def __call__(self, e, uf):
        return self.weight[e]


class _TransitionChi:
    needs_moments = True

    def __init__(self, tree, means: RegionPriorMeans, epsilon):
        self.u, self.v = tree.u.tolist(), tree.v.tolist()
        self.epsilon = epsilon
        self.stats = {
            "count": means.pixel_count,
            "prior_sum": means.prior_sum,
            "prior_sq": means.prior_sq,
        }

    def __call__(self, e, uf):
        m_s, sd_s = _moments(uf, self.u[e])
        m_t, sd_t = _moments(uf, self.v[e])
        return transition_chi(m_s, sd_s, m_t, sd_t, self.epsilon)


def sws_valuation(tree: Tree, density: DensityField) -> HierarchyValuation:
    """Closed-form cut probability of every tree edge.

    Equal-weight edges are valued together against the components formed by
    strictly lighter edges, then merged.
    """
    _check_density(tree, density)
    return _sweep(tree, density, _NoChi())[0]


def chi_valuation(
    tree: Tree,
    density: DensityField,
    prior: RegionPriorMeans | None = None,
    params: ChiParams = ChiParams(mode="volume"),
) -> HierarchyValuation:
    """Cut probabilities with marker rates scaled per edge by a factor chi.

    ``volume`` uses the edge weight as chi; ``transition`` uses the component
    prior means and population standard deviations of the two sides.
    """
    _check_density(tree, density)
    if params.mode == "none":
        chi = _NoChi()
    elif params.mode == "volume":
        chi = _VolumeChi(tree)
    else:
        if prior is None:
            raise ValidationError("transition mode needs per-region prior moments")
        chi = _TransitionChi(tree, prior, params.epsilon)
    return _sweep(tree, density, chi)[0]


def edge_chi(tree: Tree, prior: RegionPriorMeans | None, params: ChiParams) -> np.ndarray:
    """The chi factor each edge receives during the sweep (1 for mode ``none``)."""
    if params.mode == "none":
        return np.ones(tree.edge_count)
    if params.mode == "volume":
        return tree.weight.astype(np.float64).copy()
    zero = DensityField(np.zeros(tree.node_count))
    return _sweep(tree, zero, _TransitionChi(tree, prior, params.epsilon))[1]


def chain(tree: Tree, valuation: HierarchyValuation) -> Tree:
    """Same topology, cut probabilities as the new edge weights."""
    if valuation.p.shape != tree.weight.shape:
        raise ValidationError("valuation does not cover every tree edge")
    return tree.with_weights(valuation.p)


def _check_density(tree: Tree, density: DensityField):
    if density.measure.size != tree.node_count:
        raise ValidationError(
            f"density has {density.measure.size} regions, tree has {tree.node_count} nodes"
        )
