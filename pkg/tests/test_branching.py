"""Dominating branching walks: closed-form moments, coupling, predictions."""

import math

import numpy as np
import pytest

from critgraph._rng import Stream
from critgraph.branching import (
    coupled_gap, progeny_moments, simulate_progeny, subcritical_prediction,
)
from critgraph.model import apply_window, build_weights, critical_pareto, nu_n

TAU = 3.5


def _ws(n):
    return build_weights(critical_pareto(TAU), n)


# ---------------------------------------------------------------------------
# Closed-form moments

def test_moment_relations():
    ws = _ws(300)
    m = progeny_moments(ws)
    g = 1.0 - m.nu
    assert m.nu == pytest.approx(nu_n(ws), rel=1e-14)
    assert m.et == pytest.approx(1.0 / g, rel=1e-14)
    assert m.ewt == pytest.approx(m.nu * m.et, rel=1e-13)
    assert m.et2 == pytest.approx((1.0 + m.nu) / g ** 2 + m.s3 / g ** 3,
                                  rel=1e-13)
    assert m.et2 >= m.et ** 2  # variance nonnegative
    assert m.root is None and m.eti is None


def test_rooted_moment_relations():
    ws = _ws(300)
    m = progeny_moments(ws, 1)
    g = 1.0 - m.nu
    w1 = ws.weight_of(1)
    assert m.root == 1
    assert m.eti == pytest.approx(1.0 + w1 / g, rel=1e-14)
    assert m.ewti == pytest.approx(w1 / g, rel=1e-14)
    assert m.eti == pytest.approx(1.0 + m.ewti, rel=1e-13)
    assert m.eti2 >= m.eti ** 2
    names = [k for k, _ in m.rows()]
    assert names == ["E[T]", "E[T^2]", "E[wT]", "E[wT^2]",
                     "E[T(1)]", "E[T(1)^2]", "E[wT(1)]", "E[wT(1)^2]"]


def test_moments_refuse_critical():
    ws = _ws(300)
    # push the window far enough that nu_n exceeds 1
    hot = apply_window(ws, 2.0 * 300 ** 0.2)
    assert nu_n(hot) > 1.0
    with pytest.raises(ValueError):
        progeny_moments(hot)


def test_moments_match_monte_carlo():
    ws = _ws(300)
    reps = 4000
    m = progeny_moments(ws, 1)
    tot = np.empty(reps)
    wt = np.empty(reps)
    tot1 = np.empty(reps)
    for r in range(reps):
        o = simulate_progeny(ws, Stream.derive(101, "mc", r))
        assert not o.capped
        tot[r] = o.total
        wt[r] = o.weight
        o1 = simulate_progeny(ws, Stream.derive(101, "mc1", r), root=1)
        assert not o1.capped
        tot1[r] = o1.total
    for sample, target in ((tot, m.et), (wt, m.ewt), (tot ** 2, m.et2),
                           (wt ** 2, m.ewt2), (tot1, m.eti),
                           (tot1 ** 2, m.eti2)):
        se = sample.std(ddof=1) / math.sqrt(reps)
        z = (sample.mean() - target) / se
        assert abs(z) < 4.0, (target, sample.mean(), z)


# ---------------------------------------------------------------------------
# Simulation mechanics

def test_progeny_validation():
    ws = _ws(20)
    with pytest.raises(ValueError):
        simulate_progeny(ws, Stream.derive(1, "v"), root=0)
    with pytest.raises(ValueError):
        simulate_progeny(ws, Stream.derive(1, "v"), root=21)
    with pytest.raises(ValueError):
        simulate_progeny(ws, Stream.derive(1, "v"), cap=0)


def test_progeny_cap_semantics():
    ws = _ws(300)
    outs = [simulate_progeny(ws, Stream.derive(7, "c", r), root=1, cap=1)
            for r in range(50)]
    assert any(o.capped for o in outs)
    for o in outs:
        if o.capped:
            assert o.total == 1
        else:
            # root had no offspring: the walk ended with just the root
            assert o.total == 1 and o.weight == pytest.approx(ws.weight_of(1))


def test_progeny_determinism():
    ws = _ws(100)
    a = simulate_progeny(ws, Stream.derive(11, "det"))
    b = simulate_progeny(ws, Stream.derive(11, "det"))
    assert (a.total, a.weight) == (b.total, b.weight)


# ---------------------------------------------------------------------------
# Coupled runs

def test_coupled_domination():
    ws = _ws(2000)
    st = Stream.derive(7, "starts")
    gaps = 0
    for r in range(400):
        start = min(1 + int(st.u01() * ws.n), ws.n)
        g = coupled_gap(ws, start, Stream.derive(7, "cg", r))
        assert g.capped == 0
        assert g.total >= g.cluster_size
        assert g.weight >= g.cluster_weight - 1e-9
        assert g.cluster_size >= 1
        gaps += g.gap_total > 0
    # thinning is rare away from the hubs, so most runs have no gap
    assert gaps < 0.1 * 400


def test_coupled_marginal_matches_progeny_law():
    # the dominating-walk marginal of the coupled run is the rooted walk
    ws = _ws(300)
    reps = 3000
    m = progeny_moments(ws, 1)
    tot = np.array([coupled_gap(ws, 1, Stream.derive(13, "cm", r)).total
                    for r in range(reps)], dtype=np.float64)
    se = tot.std(ddof=1) / math.sqrt(reps)
    assert abs(tot.mean() - m.eti) / se < 4.0


def test_coupled_validation():
    ws = _ws(10)
    with pytest.raises(ValueError):
        coupled_gap(ws, 0, Stream.derive(1, "v"))
    with pytest.raises(ValueError):
        coupled_gap(ws, 1, Stream.derive(1, "v"), cap=0)


# ---------------------------------------------------------------------------
# Subcritical prediction

def test_subcritical_prediction_values():
    n = 100_000
    ws = _ws(n)
    lam = -4.0
    p = subcritical_prediction(3, ws, lam)
    wsl = apply_window(ws, lam)
    assert p.nu_lam == pytest.approx(nu_n(wsl), rel=1e-13)
    assert p.finite_n == pytest.approx(
        wsl.weight_of(3) / (1.0 - p.nu_lam), rel=1e-13)
    c3 = ws.weight_of(3) * n ** -0.4
    assert p.limit_form == pytest.approx(c3 * n ** 0.6 / 4.0, rel=1e-12)


def test_subcritical_routes_converge():
    # finite_n/limit_form approaches |lam|/|lam + drift_n| as the window
    # factor corrections (O(lam * n^-eta)) die out
    lam = -1.0
    gaps = []
    for n in (10_000, 1_000_000):
        ws = _ws(n)
        p = subcritical_prediction(3, ws, lam)
        drift = n ** 0.2 * (nu_n(ws) - 1.0)
        target = abs(lam) / abs(lam + drift)
        gaps.append(abs(p.finite_n / p.limit_form - target) / target)
    assert gaps[1] < gaps[0]
    assert gaps[1] < 0.05


def test_subcritical_prediction_validation():
    ws = _ws(100)
    with pytest.raises(ValueError):
        subcritical_prediction(0, ws, -2.0)
    with pytest.raises(ValueError):
        subcritical_prediction(1, ws, 0.5)
    with pytest.raises(ValueError):
        subcritical_prediction(1, ws, 0.0)
    with pytest.raises(ValueError):
        subcritical_prediction(1, apply_window(ws, -1.0), -2.0)
