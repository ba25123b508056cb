"""Cluster exploration by the mark walk, without building the graph.

The cluster of a vertex in the Poissonian multigraph can be sampled directly:
check vertices in breadth-first order, give each checked vertex a Poisson
number of potential neighbours with size-biased marks, and thin marks already
seen.  The walk Z_l = Z_{l-1} + X_l - 1 (Z_0 = 1) hits 0 after V steps; the
cluster size is V minus the thinned steps.  The companion walk S_l replaces
each kept mark's unit contribution by its weight, so V + S_V = weight + 1
holds pathwise.

`explore_sequential` repeats the walk cluster by cluster, rooting each new
walk at the smallest unexplored vertex (the largest remaining weight),
restricting the mark law to unexplored vertices and scaling offspring means
by the surviving weight fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from ._rng import Stream
from .model import WeightSequence

__all__ = [
    "ExplorationTrace", "explore_cluster", "SequentialResult",
    "explore_sequential", "RescaledWalk", "rescaled_walk",
    "HitCheck", "multiple_hit_check", "containment_indicator",
]


@dataclass
class ExplorationTrace:
    n: int
    start: int
    steps: int              # V: checks until Z hit 0 (or the cap)
    size: int               # |C| = steps - thinned
    weight: float           # sum of member weights (as in the sequence)
    s_final: float
    thinned: int
    capped: bool
    scale: float            # surviving-mass factor applied to offspring means
    members: np.ndarray     # 1-based, discovery order
    z: Optional[np.ndarray] = None       # Z_0..Z_V (record mode)
    s: Optional[np.ndarray] = None       # S_0..S_V
    marks: Optional[np.ndarray] = None   # 1-based marks of steps 1..V
    kept: Optional[np.ndarray] = None    # J_l flags of steps 1..V

    def __post_init__(self):
        self._member_set = None

    def member_set(self) -> set:
        if self._member_set is None:
            self._member_set = set(int(v) for v in self.members)
        return self._member_set


def default_cap(ws: WeightSequence) -> int:
    return int(math.ceil(50.0 * ws.n ** ws.exponents.rho))


_SCRATCH: dict = {}


def _scratch(key: str, size: int, dtype):
    arr = _SCRATCH.get((key, dtype))
    if arr is None or arr.shape[0] < size:
        arr = np.empty(size, dtype=dtype)
        _SCRATCH[(key, dtype)] = arr
    return arr


_EMPTY_I = np.empty(0, dtype=np.int64)
_EMPTY_F = np.empty(0, dtype=np.float64)


def _run_walk(ws, start, stream, cap, record, visited, scale, prob, alias):
    members = _scratch("members", cap + 1, np.int64)
    if record:
        marks = np.empty(cap, dtype=np.int64)
        jflags = np.empty(cap, dtype=np.int64)
        zvals = np.empty(cap + 1, dtype=np.int64)
        svals = np.empty(cap + 1, dtype=np.float64)
    else:
        marks = jflags = _EMPTY_I
        zvals = _EMPTY_I
        svals = _EMPTY_F
    steps, size, weight, s_fin, thinned, hit_cap = _kernels.explore_walk(
        stream.state, ws.weights, prob, alias, start - 1, scale, visited,
        cap, members, 1 if record else 0, marks, jflags, zvals, svals)
    tr = ExplorationTrace(
        n=ws.n, start=start, steps=int(steps), size=int(size),
        weight=float(weight), s_final=float(s_fin), thinned=int(thinned),
        capped=bool(hit_cap), scale=scale,
        members=members[:size] + 1,
    )
    tr.members = tr.members.copy()
    if record:
        tr.z = zvals[:steps + 1].copy()
        tr.s = svals[:steps + 1].copy()
        tr.marks = marks[:steps] + 1
        tr.kept = jflags[:steps].copy()
    return tr


def explore_cluster(ws: WeightSequence, start: int, stream: Stream,
                    forbidden=None, cap: Optional[int] = None,
                    record: bool = False) -> ExplorationTrace:
    """Sample the cluster of `start` (1-based) by the thinned mark walk.

    `forbidden` (optional iterable of 1-based ids) removes vertices from the
    mark law entirely: marks are drawn size-biased over the remaining
    vertices, and offspring means carry the surviving mass fraction, matching
    the cluster law of the graph with the forbidden vertices deleted.
    """
    if not (1 <= start <= ws.n):
        raise ValueError(f"start vertex {start} outside 1..{ws.n}")
    if cap is None:
        cap = default_cap(ws)
    visited = np.zeros(ws.n, dtype=np.uint8)
    scale = 1.0
    if forbidden:
        fb = np.fromiter((int(q) for q in set(forbidden)), dtype=np.int64)
        if fb.size and (fb.min() < 1 or fb.max() > ws.n):
            raise ValueError(f"forbidden ids outside 1..{ws.n}")
        if np.any(fb == start):
            raise ValueError(f"start vertex {start} is forbidden")
        visited[fb - 1] = 2
        # sum the survivors directly: subtracting the forbidden mass from
        # ell can leave a roundoff-positive residual when nothing survives
        mask = np.ones(ws.n, dtype=bool)
        mask[fb - 1] = False
        ell_live = float(np.sum(ws.weights[mask]))
        if ell_live <= 0.0:
            raise ValueError("forbidden set leaves zero residual weight")
        scale = ell_live / ws.ell
        if scale < 0.5:
            # rejection against the full table would be slow; draw from an
            # exact alias over the surviving vertices instead
            live = ws.weights.copy()
            live[fb - 1] = 0.0
            prob, alias = _kernels.alias_build(live)
        else:
            prob, alias = ws.alias_tables()
    else:
        prob, alias = ws.alias_tables()
    return _run_walk(ws, start, stream, cap, record, visited, scale, prob,
                     alias)


@dataclass
class SequentialResult:
    traces: list
    roots: np.ndarray        # 1-based root of each cluster
    scales: np.ndarray       # surviving-mass fraction when each walk started
    d_explored: np.ndarray   # running n^(1-2*alpha)/ell * sum of squared
    d_with_root: np.ndarray  # explored weights, without/with the next root
    exhausted: bool


def explore_sequential(ws: WeightSequence, stream: Stream,
                       k: Optional[int] = None, cap: Optional[int] = None,
                       record: bool = False,
                       rebuild_threshold: float = 0.5) -> SequentialResult:
    """Explore k clusters (or all of them for k=None), largest weights first.

    Cluster i+1 is rooted at the smallest unexplored vertex.  Marks are drawn
    from the size-biased law restricted to unexplored vertices — by rejection
    while the surviving mass fraction stays above `rebuild_threshold`, by a
    rebuilt alias table below it — and offspring means carry the surviving
    fraction, matching the cluster law of the graph with explored vertices
    removed.
    """
    n = ws.n
    if cap is None:
        cap = default_cap(ws)
    prob, alias = ws.alias_tables()
    visited = np.zeros(n, dtype=np.uint8)
    ell = ws.ell
    ell_live = ell
    # rejection against the current tables accepts with probability
    # ell_live/ref_ell; rebuild once that dips below the threshold
    ref_ell = ell
    live_weights = None
    traces = []
    roots = []
    scales = []
    d_expl = []
    d_root = []
    sumsq = 0.0
    dscale = float(n) ** (1.0 - 2.0 * ws.exponents.alpha) / ell
    next_root = 1
    target = k if k is not None else n
    exhausted = False
    while len(traces) < target:
        while next_root <= n and visited[next_root - 1] != 0:
            next_root += 1
        if next_root > n:
            exhausted = True
            break
        root = next_root
        scale = ell_live / ell
        if scale <= 0.0:
            # only zero-weight vertices remain: they are all isolated
            for v in range(root, n + 1):
                if visited[v - 1] == 0:
                    visited[v - 1] = 2
                    traces.append(ExplorationTrace(
                        n=n, start=v, steps=1, size=1, weight=0.0,
                        s_final=0.0, thinned=0, capped=False, scale=0.0,
                        members=np.array([v], dtype=np.int64)))
                    roots.append(v)
                    scales.append(0.0)
                    d_root.append(sumsq * dscale)
                    d_expl.append(sumsq * dscale)
                    if len(traces) >= target:
                        break
            exhausted = bool(np.all(visited != 0))
            break
        d_root.append((sumsq + ws.weights[root - 1] ** 2) * dscale)
        tr = _run_walk(ws, root, stream, cap, record, visited, scale,
                       prob, alias)
        traces.append(tr)
        roots.append(root)
        scales.append(scale)
        m0 = tr.members - 1
        ell_live -= float(np.sum(ws.weights[m0]))
        sumsq += float(np.sum(ws.weights[m0] ** 2))
        d_expl.append(sumsq * dscale)
        visited[m0] = 2
        if live_weights is not None:
            live_weights[m0] = 0.0
        if ell_live > 0.0 and ell_live / ref_ell < rebuild_threshold:
            if live_weights is None:
                live_weights = ws.weights.copy()
                live_weights[m0] = 0.0
            prob, alias = _kernels.alias_build(live_weights)
            ref_ell = ell_live
    return SequentialResult(
        traces=traces, roots=np.array(roots, dtype=np.int64),
        scales=np.array(scales, dtype=np.float64),
        d_explored=np.array(d_expl, dtype=np.float64),
        d_with_root=np.array(d_root, dtype=np.float64),
        exhausted=exhausted,
    )


@dataclass
class RescaledWalk:
    """n^-alpha * Z at times t = l * n^-rho, with the floor convention."""
    times: np.ndarray
    values: np.ndarray
    n: int
    rho: float

    def __call__(self, t):
        idx = np.floor(np.asarray(t, dtype=np.float64)
                       * float(self.n) ** self.rho).astype(np.int64)
        idx = np.clip(idx, 0, self.values.shape[0] - 1)
        return self.values[idx]


def rescaled_walk(trace: ExplorationTrace, ws: WeightSequence) -> RescaledWalk:
    if trace.z is None:
        raise ValueError("rescaled_walk needs a trace recorded with record=True")
    ex = ws.exponents
    n = float(trace.n)
    ell = np.arange(trace.z.shape[0], dtype=np.float64)
    return RescaledWalk(times=ell * n ** (-ex.rho),
                        values=trace.z * n ** (-ex.alpha),
                        n=trace.n, rho=ex.rho)


@dataclass(frozen=True)
class HitCheck:
    observed: int
    bound: float


def multiple_hit_check(trace: ExplorationTrace, ws: WeightSequence) -> HitCheck:
    """Observed thinned steps vs the mean bound
    V*w_max/ell + V(V-1)*nu_n/(2*ell) for a walk of V checks."""
    v = float(trace.steps)
    ell = ws.ell
    bound = v * ws.weights[0] / ell + v * (v - 1.0) * ws.nu() / (2.0 * ell)
    return HitCheck(observed=trace.thinned, bound=bound)


def containment_indicator(trace: ExplorationTrace, q: int) -> bool:
    if not (1 <= q <= trace.n):
        raise ValueError(f"vertex {q} outside 1..{trace.n}")
    return q in trace.member_set()
