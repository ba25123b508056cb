"""Graph generation routes, components, ordered statistics, coalescent family."""

import math

import numpy as np
import pytest

from critgraph._rng import Stream
from critgraph.graph import (
    EdgeList, coalescent_family, components, edge_probability, generate_dense,
    generate_sparse, ordered_statistics,
)
from critgraph.model import WeightSequence, build_weights, critical_pareto

TAU = 3.5


def _ws(n):
    return build_weights(critical_pareto(TAU), n)


# ---------------------------------------------------------------------------
# Connection kernels

def test_edge_probability_closed_forms():
    wi, wj, ell = 2.0, 1.5, 10.0
    x = wi * wj / ell
    assert edge_probability(wi, wj, ell, "norros_reittu") == pytest.approx(
        1.0 - math.exp(-x), rel=1e-14)
    assert edge_probability(wi, wj, ell, "chung_lu") == pytest.approx(x, rel=1e-14)
    assert edge_probability(wi, wj, ell, "grg") == pytest.approx(
        x / (1.0 + x), rel=1e-14)
    # aliases resolve to the same kernels
    assert edge_probability(wi, wj, ell, "nr") == edge_probability(
        wi, wj, ell, "norros_reittu")
    assert edge_probability(wi, wj, ell, "cl") == edge_probability(
        wi, wj, ell, "chung_lu")


def test_edge_probability_cap_and_order():
    # chung_lu caps at 1; for any x the three kernels are ordered
    assert edge_probability(6.0, 3.0, 9.0, "chung_lu") == 1.0
    for x in (0.01, 0.5, 2.0, 40.0):
        p_grg = x / (1.0 + x)
        p_nr = 1.0 - math.exp(-x)
        p_cl = min(x, 1.0)
        assert p_grg < p_nr < p_cl or (x >= 1.0 and p_grg < p_nr <= p_cl)
        assert edge_probability(x, 1.0, 1.0, "grg") == pytest.approx(p_grg)


def test_unknown_kernel_rejected():
    with pytest.raises(ValueError):
        edge_probability(1.0, 1.0, 1.0, "erdos")
    with pytest.raises(ValueError):
        generate_dense(_ws(5), Stream.derive(1, "k"), kernel="erdos")


# ---------------------------------------------------------------------------
# Dense route

def test_dense_two_vertices_chung_lu_cap_is_deterministic():
    # w1*w2/ell = 2 > 1, so the capped kernel always connects the pair
    ws = WeightSequence(TAU, np.array([6.0, 3.0]))
    for rep in range(20):
        el = generate_dense(ws, Stream.derive(3, "cap", rep), kernel="chung_lu")
        assert el.edge_count == 1
        assert (int(el.src[0]), int(el.dst[0])) == (1, 2)


def test_dense_two_vertices_frequency():
    ws = WeightSequence(TAU, np.array([2.0, 1.0]))
    x = 2.0 / 3.0
    reps = 4000
    for kernel, p in (("norros_reittu", 1.0 - math.exp(-x)),
                      ("grg", x / (1.0 + x))):
        hits = sum(
            generate_dense(ws, Stream.derive(11, kernel, r), kernel=kernel).edge_count
            for r in range(reps))
        se = math.sqrt(p * (1.0 - p) / reps)
        assert abs(hits / reps - p) < 4.0 * se


def test_dense_guard():
    with pytest.raises(ValueError):
        generate_dense(_ws(51), Stream.derive(1, "g"), guard=50)


def test_dense_chunked_row_path_matches_expectation():
    # n > 2000 exercises the row-chunked branch; check the realized edge
    # count against the Poisson-binomial mean within 5 sigma
    ws = _ws(2100)
    el = generate_dense(ws, Stream.derive(5, "chunked"))
    w = ws.weights
    iu, ju = np.triu_indices(ws.n, 1)
    p = -np.expm1(-w[iu] * w[ju] / ws.ell)
    mean = float(np.sum(p))
    sd = math.sqrt(float(np.sum(p * (1.0 - p))))
    assert abs(el.edge_count - mean) < 5.0 * sd
    assert np.all(el.src < el.dst)


def test_dense_zero_weights_empty():
    ws = WeightSequence(TAU, np.zeros(4))
    el = generate_dense(ws, Stream.derive(9, "z"))
    assert el.edge_count == 0


# ---------------------------------------------------------------------------
# Sparse route

def test_sparse_counter_identity():
    ws = _ws(500)
    for rep in range(10):
        el = generate_sparse(ws, Stream.derive(21, "cnt", rep))
        assert el.edge_count == el.n_draws - el.n_selfloops - el.n_multi
        assert np.all((1 <= el.src) & (el.src < el.dst) & (el.dst <= ws.n))
        # merged edge list has no duplicates
        key = el.src * (ws.n + 1) + el.dst
        assert np.unique(key).shape[0] == el.edge_count


def test_sparse_zero_weights_empty():
    ws = WeightSequence(TAU, np.zeros(4))
    assert generate_sparse(ws, Stream.derive(9, "z")).edge_count == 0


def test_sparse_determinism():
    ws = _ws(300)
    a = generate_sparse(ws, Stream.derive(77, "det"))
    b = generate_sparse(ws, Stream.derive(77, "det"))
    np.testing.assert_array_equal(a.src, b.src)
    np.testing.assert_array_equal(a.dst, b.dst)
    c = generate_sparse(ws, Stream.derive(78, "det"))
    assert not (a.edge_count == c.edge_count
                and np.array_equal(a.src, c.src) and np.array_equal(a.dst, c.dst))


def test_routes_agree_per_pair():
    # both routes realize the same simple-graph law (exponential kernel);
    # compare per-pair presence frequencies by two-proportion z with a
    # Bonferroni threshold over the 45 pairs
    n, reps = 10, 4000
    ws = _ws(n)
    iu, ju = np.triu_indices(n, 1)
    counts = np.zeros((2, iu.shape[0]))
    for r in range(reps):
        for k, el in enumerate((
                generate_dense(ws, Stream.derive(31, "dense", r)),
                generate_sparse(ws, Stream.derive(31, "sparse", r)))):
            key = (el.src - 1) * n + (el.dst - 1)
            ref = iu * n + ju
            counts[k] += np.isin(ref, key)
    p_pool = (counts[0] + counts[1]) / (2.0 * reps)
    se = np.sqrt(np.maximum(p_pool * (1.0 - p_pool) * 2.0 / reps, 1e-300))
    z = (counts[0] - counts[1]) / reps / se
    # alpha = 1e-3 across 45 comparisons -> threshold ~ 3.9
    assert float(np.max(np.abs(z))) < 3.9
    # and total edge counts match in distribution (mean check)
    diff = (counts[0].sum() - counts[1].sum()) / reps
    tot_se = math.sqrt(float(np.sum(p_pool * (1.0 - p_pool))) * 2.0 / reps)
    assert abs(diff) < 4.0 * tot_se


# ---------------------------------------------------------------------------
# Components

def _edges(n, pairs):
    if pairs:
        src = np.array([a for a, _ in pairs], dtype=np.int64)
        dst = np.array([b for _, b in pairs], dtype=np.int64)
    else:
        src = np.empty(0, np.int64)
        dst = np.empty(0, np.int64)
    return EdgeList(n, src, dst, "norros_reittu")


def test_components_handcrafted():
    # vertices 1..7: triangle {1,2,3}, path {4,5}, isolated 6, 7
    ws = WeightSequence(TAU, np.array([5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.0]))
    tab = components(_edges(7, [(1, 2), (2, 3), (1, 3), (4, 5)]), ws)
    assert tab.count == 4
    assert tab.min_vertex.tolist() == [1, 4, 6, 7]
    assert tab.sizes.tolist() == [3, 2, 1, 1]
    np.testing.assert_allclose(tab.weights, [12.0, 3.0, 0.5, 0.0])
    assert tab.surplus.tolist() == [1, 0, 0, 0]
    assert tab.labels[1:].tolist() == [1, 1, 1, 4, 4, 6, 7]
    assert sorted(tab.members(0).tolist()) == [1, 2, 3]
    assert tab.index_of_vertex(5) == 1
    assert tab.summary(0).surplus == 1
    with pytest.raises(ValueError):
        tab.index_of_vertex(8)


def test_components_n_mismatch():
    with pytest.raises(ValueError):
        components(_edges(4, [(1, 2)]), _ws(5))


def test_surplus_counts_extra_edges():
    ws = WeightSequence(TAU, np.ones(4))
    # complete graph K4: 6 edges, 4 vertices -> surplus 3
    pairs = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
    tab = components(_edges(4, pairs), ws)
    assert tab.count == 1 and tab.surplus[0] == 3
    # spanning tree -> surplus 0
    tab = components(_edges(4, [(1, 2), (2, 3), (3, 4)]), ws)
    assert tab.surplus[0] == 0


def test_no_edges_all_singletons():
    ws = _ws(6)
    tab = components(_edges(6, []), ws)
    assert tab.count == 6
    assert tab.sizes.tolist() == [1] * 6
    assert tab.surplus.tolist() == [0] * 6


def test_ordered_statistics_scale_and_ties():
    n = 6
    ws = WeightSequence(TAU, np.array([1.0, 1.0, 2.0, 2.0, 7.0, 0.0]))
    # components {1,2}, {3,4}, {5}, {6}: sizes 2,2,1,1; weights 2,4,7,0
    tab = components(_edges(n, [(1, 2), (3, 4)]), ws)
    st = ordered_statistics(tab, ws)
    assert st.scale == pytest.approx(n ** -0.6, rel=1e-14)
    # size ties broken by min_vertex ascending
    assert st.size_min_vertex.tolist() == [1, 3, 5, 6]
    np.testing.assert_allclose(st.sizes / st.scale, [2, 2, 1, 1])
    assert st.weight_min_vertex.tolist() == [5, 3, 1, 6]
    np.testing.assert_allclose(st.weights / st.scale, [7, 4, 2, 0])
    assert np.all(np.diff(st.sizes) <= 0) and np.all(np.diff(st.weights) <= 0)


# ---------------------------------------------------------------------------
# Coalescent family

def test_family_coupled_nested_edges():
    ws = _ws(400)
    grid = [0.0, 0.5, 1.5]
    fam = coalescent_family(ws, 0.2, grid, Stream.derive(41, "fam"))
    assert fam.coupled
    assert fam.times.tolist() == grid
    prev_edges = -1
    prev_top = -1.0
    prev_count = None
    for tab, masses in zip(fam.tables, fam.masses):
        edges_now = int(np.sum(tab.surplus + tab.sizes - 1))
        assert edges_now >= prev_edges
        prev_edges = edges_now
        if prev_count is not None:
            assert tab.count <= prev_count  # merging only
        prev_count = tab.count
        assert masses[0] >= prev_top  # top mass grows along the coupling
        prev_top = float(masses[0])
        assert int(np.sum(tab.sizes)) == ws.n


def test_family_marginal_matches_direct_generation():
    # the t=0, lambda_n=0 marginal is the plain sparse/dense graph law:
    # compare mean component count over replications
    n, reps = 120, 300
    ws = _ws(n)
    fam_counts = []
    direct_counts = []
    for r in range(reps):
        fam = coalescent_family(ws, 0.0, [0.0], Stream.derive(55, "fm", r))
        fam_counts.append(fam.tables[0].count)
        el = generate_dense(ws, Stream.derive(55, "fd", r))
        direct_counts.append(components(el, ws).count)
    a, b = np.array(fam_counts, float), np.array(direct_counts, float)
    se = math.sqrt(a.var(ddof=1) / reps + b.var(ddof=1) / reps)
    assert abs(a.mean() - b.mean()) < 4.0 * se


def test_family_above_guard_uncoupled():
    ws = _ws(50)
    fam = coalescent_family(ws, 0.0, [0.0, 1.0], Stream.derive(61, "ug"),
                            pairwise_guard=10)
    assert not fam.coupled
    for tab in fam.tables:
        assert 1 <= tab.count <= ws.n


def test_family_rejects_nonpositive_factor():
    ws = _ws(100)
    bad_t = -(1.0 / (ws.ell * 100 ** -1.2)) - 1.0
    with pytest.raises(ValueError):
        coalescent_family(ws, 0.0, [bad_t], Stream.derive(1, "bad"))
