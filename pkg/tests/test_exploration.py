"""Mark-walk cluster exploration and its pathwise identities."""

import math

import numpy as np
import pytest

from critgraph._rng import Stream
from critgraph.exploration import (
    ExplorationTrace, containment_indicator, default_cap, explore_cluster,
    explore_sequential, multiple_hit_check, rescaled_walk,
)
from critgraph.graph import components, generate_dense
from critgraph.model import build_weights, critical_pareto

TAU = 3.5


def _ws(n):
    return build_weights(critical_pareto(TAU), n)


# ---------------------------------------------------------------------------
# Single-cluster walk

def test_walk_identities():
    ws = _ws(500)
    for rep in range(30):
        tr = explore_cluster(ws, 1, Stream.derive(5, "ident", rep), record=True)
        assert tr.size == tr.steps - tr.thinned
        # each step's unit is swapped for its weight in S, so V + S_V = weight + 1
        assert tr.steps + tr.s_final == pytest.approx(tr.weight + 1.0, abs=1e-9)
        assert tr.weight == pytest.approx(
            float(np.sum(ws.weights[tr.members - 1])), abs=1e-9)
        assert tr.members[0] == 1
        assert np.unique(tr.members).shape[0] == tr.size
        assert int(np.sum(tr.kept[:tr.steps])) == tr.size
        assert tr.z[0] == 1 and tr.z[tr.steps] == 0
        assert np.all(tr.z[:tr.steps] > 0)          # V is the first hit of 0
        assert np.all(np.diff(tr.z[:tr.steps + 1]) >= -1)
        assert not tr.capped


def test_walk_determinism_and_seed_sensitivity():
    ws = _ws(300)
    a = explore_cluster(ws, 7, Stream.derive(42, "det"))
    b = explore_cluster(ws, 7, Stream.derive(42, "det"))
    np.testing.assert_array_equal(a.members, b.members)
    sizes = {explore_cluster(ws, 7, Stream.derive(s, "det")).size
             for s in range(40, 60)}
    assert len(sizes) > 1


def test_start_validation():
    ws = _ws(10)
    for bad in (0, 11, -1):
        with pytest.raises(ValueError):
            explore_cluster(ws, bad, Stream.derive(1, "v"))


def test_cap_flag():
    ws = _ws(2000)
    tr = explore_cluster(ws, 1, Stream.derive(8, "cap"), cap=3)
    assert tr.capped and tr.steps <= 3
    assert default_cap(ws) == int(math.ceil(50.0 * 2000 ** 0.6))


def test_matches_graph_cluster_law():
    # mean cluster size of vertex 1: walk vs actual graph components
    n, reps = 200, 400
    ws = _ws(n)
    walk_sizes = np.array([
        explore_cluster(ws, 1, Stream.derive(17, "law/w", r)).size
        for r in range(reps)], dtype=np.float64)
    graph_sizes = np.empty(reps)
    for r in range(reps):
        el = generate_dense(ws, Stream.derive(17, "law/g", r))
        tab = components(el, ws)
        graph_sizes[r] = tab.sizes[tab.index_of_vertex(1)]
    se = math.sqrt(walk_sizes.var(ddof=1) / reps + graph_sizes.var(ddof=1) / reps)
    assert abs(walk_sizes.mean() - graph_sizes.mean()) < 4.0 * se


# ---------------------------------------------------------------------------
# Forbidden vertices

def test_forbidden_excluded_from_cluster():
    ws = _ws(100)
    forbidden = [2, 3, 4, 5]
    for rep in range(50):
        tr = explore_cluster(ws, 1, Stream.derive(23, "forb", rep),
                             forbidden=forbidden)
        assert not (tr.member_set() & set(forbidden))
        assert 0.5 < tr.scale < 1.0


def test_forbidden_rebuilt_table_branch():
    # forbid more than half the mass to hit the rebuilt-alias branch
    ws = _ws(100)
    order = np.argsort(ws.weights)[::-1]
    cum = np.cumsum(ws.weights[order])
    k = int(np.searchsorted(cum, 0.6 * ws.ell)) + 1
    forbidden = (order[:k] + 1).tolist()
    start = next(v for v in range(1, 101) if v not in set(forbidden))
    for rep in range(50):
        tr = explore_cluster(ws, start, Stream.derive(29, "forb2", rep),
                             forbidden=forbidden)
        assert tr.scale < 0.5
        assert not (tr.member_set() & set(forbidden))
        assert tr.members[0] == start


def test_forbidden_validation():
    ws = _ws(20)
    with pytest.raises(ValueError):
        explore_cluster(ws, 3, Stream.derive(1, "x"), forbidden=[3])
    with pytest.raises(ValueError):
        explore_cluster(ws, 3, Stream.derive(1, "x"), forbidden=[0])
    with pytest.raises(ValueError):
        explore_cluster(ws, 3, Stream.derive(1, "x"), forbidden=[21])
    # forbidding all positive weight leaves nothing to explore against
    with pytest.raises(ValueError):
        explore_cluster(ws, 20, Stream.derive(1, "x"),
                        forbidden=list(range(1, 20)))


# ---------------------------------------------------------------------------
# Sequential exploration

def test_sequential_partitions_vertices():
    n = 400
    ws = _ws(n)
    res = explore_sequential(ws, Stream.derive(31, "seq"))
    assert res.exhausted
    all_members = np.concatenate([t.members for t in res.traces])
    assert np.sort(all_members).tolist() == list(range(1, n + 1))
    assert int(sum(t.size for t in res.traces)) == n
    # each root is the smallest id of its own cluster, roots increase
    for t, root in zip(res.traces, res.roots):
        assert root == int(np.min(t.members))
    assert np.all(np.diff(res.roots) > 0)
    # surviving-mass fractions only shrink
    assert np.all(np.diff(res.scales) <= 1e-12)
    assert res.scales[0] == 1.0


def test_sequential_k_limit():
    ws = _ws(400)
    res = explore_sequential(ws, Stream.derive(33, "seqk"), k=3)
    assert len(res.traces) == 3 and not res.exhausted
    assert res.d_explored.shape == (3,) and res.d_with_root.shape == (3,)


def test_sequential_d_tracks_squared_weights():
    n = 300
    ws = _ws(n)
    res = explore_sequential(ws, Stream.derive(37, "seqd"), k=5)
    dscale = float(n) ** (1.0 - 2.0 * ws.exponents.alpha) / ws.ell
    run = 0.0
    for i, t in enumerate(res.traces):
        with_root = run + float(ws.weights[res.roots[i] - 1] ** 2)
        assert res.d_with_root[i] == pytest.approx(with_root * dscale, rel=1e-10)
        run += float(np.sum(ws.weights[t.members - 1] ** 2))
        assert res.d_explored[i] == pytest.approx(run * dscale, rel=1e-10)
    assert np.all(np.diff(res.d_explored) >= 0.0)


def test_sequential_zero_weight_tail():
    # once only zero-weight vertices remain they come out as isolated
    # singletons with scale 0
    ws = _ws(30)
    res = explore_sequential(ws, Stream.derive(39, "seqz"))
    assert res.exhausted
    last = res.traces[-1]
    zero_ids = np.nonzero(ws.weights == 0.0)[0] + 1
    for t in res.traces:
        if t.scale == 0.0:
            assert t.size == 1 and t.weight == 0.0
            assert t.members[0] in zero_ids
    assert last.size >= 1


def test_sequential_matches_graph_top_component():
    # largest rescaled weight from sequential exploration vs from the graph
    n, reps = 250, 300
    ws = _ws(n)
    from critgraph.graph import generate_sparse, ordered_statistics
    seq_top = np.empty(reps)
    gr_top = np.empty(reps)
    scale = float(n) ** (-ws.exponents.rho)
    for r in range(reps):
        res = explore_sequential(ws, Stream.derive(43, "st/s", r), k=40)
        seq_top[r] = max(t.weight for t in res.traces) * scale
        el = generate_sparse(ws, Stream.derive(43, "st/g", r))
        gr_top[r] = ordered_statistics(components(el, ws), ws).weights[0]
    se = math.sqrt(seq_top.var(ddof=1) / reps + gr_top.var(ddof=1) / reps)
    assert abs(seq_top.mean() - gr_top.mean()) < 4.0 * se


# ---------------------------------------------------------------------------
# Rescaled walk

def test_rescaled_walk_requires_record():
    ws = _ws(100)
    tr = explore_cluster(ws, 1, Stream.derive(47, "rw"))
    with pytest.raises(ValueError):
        rescaled_walk(tr, ws)


def test_rescaled_walk_floor_convention():
    ws = _ws(100)
    tr = explore_cluster(ws, 1, Stream.derive(47, "rw2"), record=True)
    rw = rescaled_walk(tr, ws)
    n_rho = 100.0 ** 0.6
    n_alpha = 100.0 ** 0.4
    assert rw.times.shape[0] == tr.steps + 1
    np.testing.assert_allclose(rw.values, tr.z / n_alpha, rtol=1e-14)
    np.testing.assert_allclose(np.diff(rw.times), 1.0 / n_rho, rtol=1e-12)
    # floor indexing: value is constant on [l, l+1) step intervals
    assert rw(0.5 / n_rho) == rw.values[0]
    assert rw(1.5 / n_rho) == rw.values[1]
    # beyond the last step the value clamps to the final one
    assert rw(1e9) == rw.values[-1]
    # vectorized call
    out = rw(np.array([0.5, 1.5]) / n_rho)
    np.testing.assert_array_equal(out, rw.values[:2])


# ---------------------------------------------------------------------------
# Multiple hits and containment

def test_hit_bound_formula():
    ws = _ws(50)
    tr = ExplorationTrace(n=50, start=1, steps=10, size=8, weight=3.0,
                          s_final=0.0, thinned=2, capped=False, scale=1.0,
                          members=np.arange(1, 9, dtype=np.int64))
    hc = multiple_hit_check(tr, ws)
    v = 10.0
    expect = v * ws.weights[0] / ws.ell + v * 9.0 * ws.nu() / (2.0 * ws.ell)
    assert hc.observed == 2
    assert hc.bound == pytest.approx(expect, rel=1e-12)


def test_hit_bound_holds_on_average():
    # uniformly random start vertex; the bound dominates the mean thinning
    ws = _ws(1000)
    reps = 2000
    st = Stream.derive(2026, "mhits")
    obs = np.empty(reps)
    bnd = np.empty(reps)
    for r in range(reps):
        start = min(1 + int(st.u01() * ws.n), ws.n)
        tr = explore_cluster(ws, start, Stream.derive(2026, "mhits/walk", r))
        hc = multiple_hit_check(tr, ws)
        obs[r] = hc.observed
        bnd[r] = hc.bound
    assert obs.mean() <= bnd.mean()


def test_containment_indicator():
    ws = _ws(60)
    tr = explore_cluster(ws, 1, Stream.derive(53, "cont"))
    for v in tr.members:
        assert containment_indicator(tr, int(v))
    outside = set(range(1, 61)) - tr.member_set()
    if outside:
        assert not containment_indicator(tr, min(outside))
    with pytest.raises(ValueError):
        containment_indicator(tr, 61)
