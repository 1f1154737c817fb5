import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import edge_sides, naive_cut_probability
from conftest import random_tree, tree_edges
from hrfseg.errors import ValidationError
from hrfseg.fine_partition import region_prior_means
from hrfseg.graph_core import Rag, UnionFind, minimum_spanning_tree
from hrfseg.sws import (
    ChiParams,
    DensityField,
    HierarchyValuation,
    chain,
    chi_valuation,
    combine_priors,
    cut_probability,
    cut_probability_inclusion_exclusion,
    edge_chi,
    prior_density,
    sws_valuation,
    transition_chi,
    uniform_density,
)

LN2 = math.log(2.0)


def two_node_tree(weight=1.0):
    return minimum_spanning_tree(Rag.from_edges(2, [(0, 1, weight)]))


# densities


def test_uniform_equal_regions():
    assert uniform_density(np.array([[0, 0, 1, 1]]), 10).measure.tolist() == [5.0, 5.0]


def test_uniform_unequal_regions():
    labels = np.ones((10, 10), int)
    labels[0, 0] = 0
    assert uniform_density(labels, 100).measure.tolist() == [1.0, 99.0]


def test_uniform_total_is_n():
    labels = np.random.default_rng(0).integers(0, 7, (9, 9))
    assert uniform_density(labels, 13.7).total == pytest.approx(13.7, rel=1e-9)


def test_uniform_rejects_nonpositive():
    with pytest.raises(ValidationError):
        uniform_density(np.zeros((2, 2), int), 0)


@pytest.mark.parametrize("c", [1.0, 0.5, 0.3, 200 / 255])
def test_constant_prior_is_uniform_bitwise(c):
    labels = np.random.default_rng(1).integers(0, 6, (11, 13))
    means = region_prior_means(labels, np.full(labels.shape, c))
    assert prior_density(means, 6).measure.tobytes() == uniform_density(labels, 6).measure.tobytes()


def test_prior_two_regions():
    labels = np.array([[0, 0, 1, 1]])
    means = region_prior_means(labels, np.array([[0.2, 0.2, 0.8, 0.8]]))
    np.testing.assert_allclose(prior_density(means, 10).measure, [2.0, 8.0], rtol=1e-15)


def test_prior_density_pixel_sum_oracle():
    rng = np.random.default_rng(2)
    labels = rng.integers(0, 8, (10, 10))
    prior = rng.random((10, 10))
    sums = np.array([sum(prior[labels == r].tolist()) for r in range(8)])
    expected = 5.0 * sums / sums.sum()
    np.testing.assert_allclose(prior_density(region_prior_means(labels, prior), 5.0).measure, expected, rtol=1e-12)


def test_degenerate_prior():
    labels = np.array([[0, 1]])
    with pytest.raises(ValidationError, match="degenerate"):
        prior_density(region_prior_means(labels, np.zeros((1, 2))), 3)


def test_combine_with_zero_prior():
    rng = np.random.default_rng(3)
    labels = rng.integers(0, 5, (8, 8))
    a = rng.random((8, 8))
    out = combine_priors(a, np.zeros_like(a))
    np.testing.assert_array_equal(out, a / 2)
    d1 = prior_density(region_prior_means(labels, out), 4).measure
    d2 = prior_density(region_prior_means(labels, a), 4).measure
    np.testing.assert_array_equal(d1, d2)


def test_combine_identical():
    a = np.random.default_rng(4).random((3, 3))
    np.testing.assert_array_equal(combine_priors(a, a), a)


def test_combine_matches_pixel_sum():
    rng = np.random.default_rng(5)
    labels = rng.integers(0, 6, (9, 9))
    a, b = rng.random((9, 9)), rng.random((9, 9))
    dens = prior_density(region_prior_means(labels, combine_priors(a, b)), 6).measure
    sums = np.array([(a + b)[labels == r].sum() for r in range(6)])
    np.testing.assert_allclose(dens, 6 * sums / sums.sum(), rtol=1e-12)


def test_combine_shape_mismatch():
    with pytest.raises(ValidationError):
        combine_priors(np.zeros((2, 2)), np.zeros((2, 3)))


# closed form


def test_cut_probability_ln2():
    assert cut_probability(LN2, LN2) == pytest.approx(0.25, abs=1e-15)


def test_cut_probability_empty_side():
    assert cut_probability(0.0, 3.7) == 0.0


@settings(max_examples=200)
@given(st.floats(0, 50), st.floats(0, 50))
def test_factorisation_and_range(a, b):
    p = cut_probability(a, b)
    assert abs(p - cut_probability_inclusion_exclusion(a, b)) <= 1e-12
    assert 0.0 <= p <= 1.0
    if a == 0.0 or b == 0.0:
        assert p == 0.0
    elif a > 1e-150 and b > 1e-150:
        assert p > 0.0


def test_monotone_in_each_side():
    grid = np.linspace(0, 6, 20)
    for lt in grid:
        ps = [cut_probability(ls, lt) for ls in grid]
        assert all(x <= y for x, y in zip(ps, ps[1:]))


def test_two_node_valuation():
    val = sws_valuation(two_node_tree(), DensityField(np.array([LN2, LN2])))
    assert val.p[0] == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("seed", range(8))
def test_valuation_matches_explicit_cuts(seed):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, 10, distinct=bool(seed % 2))
    measure = rng.random(10) * 2
    got = sws_valuation(tree, DensityField(measure)).p
    np.testing.assert_allclose(got, naive_cut_probability(10, tree_edges(tree), measure), atol=1e-12)


def test_tie_batch_reads_components_before_merging():
    # path 0-1-2 with equal weights: each edge sees singleton sides
    tree = minimum_spanning_tree(Rag.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]))
    val = sws_valuation(tree, DensityField(np.array([1.0, 1.0, 1.0])))
    single = (1 - math.exp(-1)) ** 2
    np.testing.assert_allclose(val.p, [single, single], rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_valuation_independent_of_edge_input_order(seed):
    rng = np.random.default_rng(seed)
    n = 9
    edges = [(int(rng.integers(0, i)), i, float(rng.integers(0, 3))) for i in range(1, n)]
    measure = DensityField(rng.random(n))
    t1 = minimum_spanning_tree(Rag.from_edges(n, edges))
    t2 = minimum_spanning_tree(Rag.from_edges(n, [edges[i] for i in rng.permutation(n - 1)]))
    assert sws_valuation(t1, measure).p.tobytes() == sws_valuation(t2, measure).p.tobytes()


# chi modulation


def test_transition_chi_extremes():
    assert transition_chi(1.0, 0.0, 0.0, 0.0, 0.01) == pytest.approx(100.0)
    assert transition_chi(0.5, 0.0, 0.5, 0.0, 0.01) == pytest.approx(25.0)


def test_volume_zero_weight_gives_zero():
    val = chi_valuation(two_node_tree(0.0), DensityField(np.array([3.0, 2.0])))
    assert val.p[0] == 0.0


def test_volume_matches_scaled_naive():
    rng = np.random.default_rng(7)
    tree = random_tree(rng, 9)
    measure = rng.random(9)
    got = chi_valuation(tree, DensityField(measure), params=ChiParams(mode="volume")).p
    expected = naive_cut_probability(9, tree_edges(tree), measure, chi=tree.weight)
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_chi_mode_none_equals_sws():
    rng = np.random.default_rng(8)
    tree = random_tree(rng, 7)
    dens = DensityField(rng.random(7))
    assert chi_valuation(tree, dens, params=ChiParams(mode="none")).p.tobytes() == sws_valuation(tree, dens).p.tobytes()


def test_chi_params_validation():
    with pytest.raises(ValueError):
        ChiParams(epsilon=0.0)
    with pytest.raises(ValueError):
        ChiParams(mode="banana")


def strip_labels(n, width=3):
    """Node i owns a block of ``width`` consecutive pixels in one row."""
    return np.repeat(np.arange(n), width)[None, :]


@pytest.mark.parametrize("seed", range(5))
def test_transition_matches_pixel_moments(seed):
    rng = np.random.default_rng(20 + seed)
    n = 12
    tree = random_tree(rng, n, distinct=bool(seed % 2))
    labels = strip_labels(n)
    prior = rng.random(labels.shape)
    means = region_prior_means(labels, prior)
    measure = rng.random(n)
    params = ChiParams(mode="transition")
    chis = edge_chi(tree, means, params)
    edges = tree_edges(tree)
    for e in range(len(edges)):
        side_a, side_b = edge_sides(n, edges, e)
        pa = prior[np.isin(labels, side_a)]
        pb = prior[np.isin(labels, side_b)]
        expected = transition_chi(pa.mean(), pa.std(), pb.mean(), pb.std(), 0.01)
        assert chis[e] == pytest.approx(expected, rel=1e-9)
    got = chi_valuation(tree, DensityField(measure), means, params).p
    np.testing.assert_allclose(got, naive_cut_probability(n, edges, measure, chi=chis), atol=1e-12)


def test_incremental_moments_every_merge():
    rng = np.random.default_rng(9)
    n = 12
    labels = strip_labels(n, 4)
    prior = rng.random(labels.shape)
    means = region_prior_means(labels, prior)
    uf = UnionFind(n, count=means.pixel_count, prior_sum=means.prior_sum, prior_sq=means.prior_sq)
    for _ in range(n - 1):
        a, b = rng.integers(0, n, 2).tolist()
        uf.union(a, b)
        members = [i for i in range(n) if uf.find(i) == uf.find(a)]
        vals = prior[np.isin(labels, members)]
        count = uf.stat("count", a)
        mean = uf.stat("prior_sum", a) / count
        sd = math.sqrt(max(uf.stat("prior_sq", a) / count - mean * mean, 0.0))
        assert mean == pytest.approx(vals.mean(), rel=1e-12)
        assert sd == pytest.approx(vals.std(), rel=1e-7, abs=1e-9)


def test_transition_requires_prior():
    with pytest.raises(ValidationError):
        chi_valuation(two_node_tree(), DensityField(np.ones(2)), None, ChiParams(mode="transition"))


# chaining


def test_chain_replaces_weights_keeps_topology():
    rng = np.random.default_rng(10)
    tree = random_tree(rng, 8)
    val = sws_valuation(tree, DensityField(rng.random(8)))
    chained = chain(tree, val)
    assert chained.u.tolist() == tree.u.tolist() and chained.v.tolist() == tree.v.tolist()
    np.testing.assert_array_equal(chained.weight, val.p)
    again = chain(chain(tree, val), val)
    assert again.edge_id.tolist() == tree.edge_id.tolist()


def test_chain_equal_p_is_one_batch():
    tree = minimum_spanning_tree(Rag.from_edges(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0)]))
    flat = chain(tree, HierarchyValuation(np.full(3, 0.5), tree.weight, tree.edge_id))
    val = sws_valuation(flat, DensityField(np.ones(4)))
    np.testing.assert_allclose(val.p, (1 - math.exp(-1)) ** 2, rtol=1e-14)


def test_chain_volume_two_pass():
    rng = np.random.default_rng(11)
    n = 8
    tree = random_tree(rng, n)
    measure = rng.random(n)
    first = chi_valuation(tree, DensityField(measure), params=ChiParams(mode="volume"))
    second = sws_valuation(chain(tree, first), DensityField(measure))

    edges = tree_edges(tree)
    p1 = naive_cut_probability(n, edges, measure, chi=[w for _, _, w in edges])
    edges2 = [(a, b, p) for (a, b, _), p in zip(edges, p1)]
    p2 = naive_cut_probability(n, edges2, measure)
    np.testing.assert_allclose(second.p, p2, atol=1e-12)


def test_density_size_checked():
    with pytest.raises(ValidationError):
        sws_valuation(two_node_tree(), DensityField(np.ones(3)))
