"""Spectrally positive drift-plus-jumps processes with one-shot clocks.

The central object is a piecewise-linear path started at b that drifts at a
constant negative rate and takes a positive jump the first time each of K-1
exponential clocks rings (clock i has rate ~ i^-alpha, jump ~ i^-alpha).
Alongside it live the dominating path that jumps at *every* arrival of the
clock streams, first-passage times of level 0, the successive-excursion
variant that retires clocks across excursions, the Laplace exponent of the
untruncated limit, and the characteristic-function product with its
density-bound envelope.

Two labelings of the jump/rate coefficient pair are in circulation for the
successive variant; the switch `convention` selects between them:
  - "size_rate" (default): jump b*i^-alpha, clock rate a*i^-alpha — the same
    labeling as the single-excursion process;
  - "display": jump a*i^-alpha, clock rate b*i^-alpha.
Both share the compensator product a*b*i^-(2*alpha) and the root offset
b*root^-alpha, so drift slopes agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from . import _kernels
from ._rng import Stream
from .model import LimitParams

DEFAULT_K = 10_000
CONVENTIONS = ("size_rate", "display")

_TINY = 5e-324          # smallest positive subnormal; keeps clock times > 0


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, "
                         f"got {convention!r}")


@lru_cache(maxsize=128)
def _powsum(expo: float, k: int) -> float:
    """sum_{i=1}^{k} i^-expo, summed directly."""
    if k > 50_000_000:
        raise ValueError("power-sum truncation too large to sum directly")
    return float(np.power(np.arange(1, k + 1, dtype=np.float64), -expo).sum())


@dataclass(frozen=True)
class LevyParams:
    """Constants (a, b, c), tail exponent alpha, and truncation index K."""
    a: float
    b: float
    c: float
    alpha: float
    K: int = DEFAULT_K

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0):
            raise ValueError("a and b must be positive")
        if not (1.0 / 3.0 < self.alpha < 0.5):
            raise ValueError(f"alpha = {self.alpha} outside (1/3, 1/2)")
        if self.K < 1:
            raise ValueError("K must be >= 1")

    @classmethod
    def from_limit(cls, lp: LimitParams, K: int = DEFAULT_K) -> "LevyParams":
        return cls(a=lp.a, b=lp.b, c=lp.c, alpha=lp.alpha, K=K)

    # -- per-clock arrays (ids 2..K; id 1 is the root and has no clock) --

    def clock_ids(self) -> np.ndarray:
        return np.arange(2, self.K + 1, dtype=np.int64)

    def clock_rates(self, convention: str = "size_rate") -> np.ndarray:
        _check_convention(convention)
        coeff = self.a if convention == "size_rate" else self.b
        return coeff * np.power(self.clock_ids().astype(np.float64),
                                -self.alpha)

    def jump_sizes(self, convention: str = "size_rate") -> np.ndarray:
        _check_convention(convention)
        coeff = self.b if convention == "size_rate" else self.a
        return coeff * np.power(self.clock_ids().astype(np.float64),
                                -self.alpha)

    def root_offset(self, q: int) -> float:
        """Start value of an excursion rooted at limit id q."""
        return self.b * float(q) ** (-self.alpha)

    def drift_slope(self) -> float:
        """Inter-event slope c - a*b*sum_{i=2}^K i^-2alpha of truncated
        paths.  The i=1 clock never produces a jump (its arrival is the
        root itself, realized as the start value b), but its compensator
        -a*b*t is part of c already; only the compensators of the jumping
        clocks i >= 2 are added on top."""
        return self.c - self.a * self.b * (_powsum(2.0 * self.alpha, self.K)
                                           - 1.0)

    def normalized(self):
        """(unit-coefficient params, time scale, space scale).

        A path built from these params at time t equals `space` times the
        path built from the normalized params at time `time * t`, provided
        the normalized path runs on clocks scaled by `time` — an exact
        pathwise identity.
        """
        norm = LevyParams(a=1.0, b=1.0, c=self.c / (self.a * self.b),
                          alpha=self.alpha, K=self.K)
        return norm, self.a, self.b


def default_horizon(params: LevyParams) -> float:
    """10 * b / (-c) when the mean drift is negative, else 50."""
    gap = -params.c
    if gap > 0.0:
        return 10.0 * params.b / gap
    return 50.0


# ---------------------------------------------------------------------------
# Clocks

@dataclass
class ClockSet:
    """First-arrival times (and optionally full arrival streams) of the
    exponential clocks for ids 2..K.

    `first[i-2]` is clock i's first arrival; +inf marks clocks that did not
    ring before `horizon` when the set was built from bounded streams
    (`horizon` is None for exact unbounded first arrivals).  `arr_times` /
    `arr_ids` hold every arrival up to `horizon`, time-sorted.
    """
    K: int
    rates: np.ndarray
    first: np.ndarray
    horizon: Optional[float] = None
    arr_times: Optional[np.ndarray] = None
    arr_ids: Optional[np.ndarray] = None

    @property
    def has_streams(self) -> bool:
        return self.arr_times is not None

    def scaled(self, time_factor: float) -> "ClockSet":
        """Clocks on a rescaled time axis (rates divide, times multiply)."""
        if time_factor <= 0.0:
            raise ValueError("time_factor must be positive")
        return ClockSet(
            K=self.K,
            rates=self.rates / time_factor,
            first=self.first * time_factor,
            horizon=None if self.horizon is None
            else self.horizon * time_factor,
            arr_times=None if self.arr_times is None
            else self.arr_times * time_factor,
            arr_ids=self.arr_ids,
        )


def sample_clocks(params: LevyParams, stream: Stream,
                  with_streams: bool = False,
                  horizon: Optional[float] = None,
                  convention: str = "size_rate") -> ClockSet:
    """Draw the clock set; `with_streams` keeps every arrival up to
    `horizon` (required then) instead of just the first per clock."""
    rates = params.clock_rates(convention)
    if not with_streams:
        first = stream.exponentials(rates) if rates.size else rates.copy()
        np.maximum(first, _TINY, out=first)
        return ClockSet(K=params.K, rates=rates, first=first)
    if horizon is None or horizon <= 0.0:
        raise ValueError("with_streams needs a positive horizon")
    r_total = float(rates.sum())
    times = []
    t = 0.0
    chunk = max(256, int(1.2 * r_total * horizon) + 16)
    while t <= horizon:
        gaps = -np.log(stream.uniforms(chunk)) / r_total
        arr = t + np.cumsum(gaps)
        times.append(arr)
        t = float(arr[-1])
    times = np.concatenate(times)
    times = times[times <= horizon]
    m = times.shape[0]
    prob, alias = _kernels.alias_build(rates)
    nslots = prob.shape[0]
    u1 = stream.uniforms(m)
    u2 = stream.uniforms(m)
    slot = np.minimum((u1 * nslots).astype(np.int64), nslots - 1)
    idx = np.where(u2 <= prob[slot], slot, alias[slot])
    first = np.full(rates.shape[0], np.inf)
    np.minimum.at(first, idx, times)
    return ClockSet(K=params.K, rates=rates, first=first, horizon=horizon,
                    arr_times=times, arr_ids=idx + 2)


# ---------------------------------------------------------------------------
# Paths

@dataclass
class LevyPath:
    """Piecewise-linear path: value v0 at 0, constant slope, positive jumps
    at sorted event times; right-continuous."""
    times: np.ndarray
    jumps: np.ndarray
    v0: float
    slope: float
    horizon: float
    thinned: bool

    def __post_init__(self):
        # prefix sums with a leading 0 so cum0[k] = total jump before
        # segment k's start
        self.cum0 = np.concatenate(([0.0], np.cumsum(self.jumps)))

    @property
    def n_events(self) -> int:
        return self.times.shape[0]

    def value(self, t):
        """Right-continuous value at t (scalar or array), t in [0, horizon]."""
        t = np.asarray(t, dtype=np.float64)
        k = np.searchsorted(self.times, t, side="right")
        out = self.v0 + self.slope * t + self.cum0[k]
        return float(out) if out.ndim == 0 else out

    def value_before(self, t):
        """Left limit at t."""
        t = np.asarray(t, dtype=np.float64)
        k = np.searchsorted(self.times, t, side="left")
        out = self.v0 + self.slope * t + self.cum0[k]
        return float(out) if out.ndim == 0 else out

    def events_table(self) -> np.ndarray:
        """(t_event, value_before, value_after) rows."""
        return np.column_stack([self.times, self.value_before(self.times),
                                self.value(self.times)])


def _build_path(params, sel_times, sel_jumps, horizon, thinned) -> LevyPath:
    order = np.argsort(sel_times, kind="stable")
    return LevyPath(times=sel_times[order], jumps=sel_jumps[order],
                    v0=params.b, slope=params.drift_slope(), horizon=horizon,
                    thinned=thinned)


def thinned_path(params: LevyParams, clocks: ClockSet, horizon: float,
                 convention: str = "size_rate") -> LevyPath:
    """One jump per clock, at its first arrival."""
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if clocks.K != params.K:
        raise ValueError(f"clock set K={clocks.K} != params K={params.K}")
    if clocks.horizon is not None and horizon > clocks.horizon:
        raise ValueError("clock streams were only generated up to "
                         f"{clocks.horizon}; cannot build a path to {horizon}")
    sel = clocks.first <= horizon
    return _build_path(params, clocks.first[sel],
                       params.jump_sizes(convention)[sel], horizon, True)


def dominating_path(params: LevyParams, clocks: ClockSet, horizon: float,
                    convention: str = "size_rate") -> LevyPath:
    """A jump at every arrival of every clock stream; dominates the thinned
    path built from the same clocks, pathwise."""
    if not clocks.has_streams:
        raise ValueError("dominating path needs arrival streams "
                         "(sample_clocks with with_streams=True)")
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if horizon > clocks.horizon:
        raise ValueError("clock streams were only generated up to "
                         f"{clocks.horizon}; cannot build a path to {horizon}")
    sel = clocks.arr_times <= horizon
    _check_convention(convention)
    coeff = params.b if convention == "size_rate" else params.a
    jumps = coeff * np.power(clocks.arr_ids[sel].astype(np.float64),
                             -params.alpha)
    return _build_path(params, clocks.arr_times[sel], jumps, horizon, False)


def hitting_time(path: LevyPath) -> Optional[float]:
    """First t with path value <= 0, solved exactly on the linear segments;
    None if there is no crossing before the horizon."""
    if path.v0 <= 0.0:
        return 0.0
    if path.slope >= 0.0:
        return None           # positive start, flat/rising drift, jumps up
    starts = np.concatenate(([0.0], path.times))
    vals = path.v0 + path.slope * starts + path.cum0
    ends = np.concatenate((path.times, [path.horizon]))
    cross = vals + path.slope * (ends - starts) <= 0.0
    if not cross.any():
        return None
    k = int(np.argmax(cross))
    return float(starts[k] + vals[k] / (-path.slope))


# ---------------------------------------------------------------------------
# First-passage sampling (event-driven, no materialized paths)

@dataclass
class HittingSample:
    times: np.ndarray
    misses: int
    horizon0: float
    max_doublings: int


def sample_hitting(params: LevyParams, stream: Stream, n: int,
                   convention: str = "size_rate",
                   horizon: Optional[float] = None,
                   max_doublings: int = 4) -> HittingSample:
    """n independent first-passage times of 0.

    Each path is generated event-by-event from one superposed clock stream
    and discarded; a path that fails to cross by the horizon is re-drawn
    with the horizon doubled, up to `max_doublings` times, then counted as
    a miss.
    """
    slope = params.drift_slope()
    if slope >= 0.0:
        raise ValueError(f"drift slope {slope:.4g} is not negative; "
                         "no almost-sure crossing to sample")
    rates = params.clock_rates(convention)
    jumps = params.jump_sizes(convention)
    if rates.size == 0:
        h = params.b / (-slope)
        return HittingSample(times=np.full(n, h), misses=0,
                             horizon0=horizon or default_horizon(params),
                             max_doublings=max_doublings)
    prob, alias = _kernels.alias_build(rates)
    r_total = float(rates.sum())
    t0 = horizon if horizon is not None else default_horizon(params)
    fired = np.zeros(rates.shape[0], dtype=np.int64)
    epoch = 0
    out = np.empty(n, dtype=np.float64)
    got = 0
    misses = 0
    for _ in range(n):
        t_max = t0
        hit = -1.0
        for _ in range(max_doublings + 1):
            epoch += 1
            hit = _kernels.levy_hit_scan(stream.state, prob, alias, jumps,
                                         r_total, slope, params.b, t_max,
                                         fired, epoch, 1)
            if hit >= 0.0:
                break
            t_max *= 2.0
        if hit >= 0.0:
            out[got] = hit
            got += 1
        else:
            misses += 1
    return HittingSample(times=out[:got], misses=misses, horizon0=t0,
                         max_doublings=max_doublings)


# ---------------------------------------------------------------------------
# Successive excursions with retired clocks

@dataclass
class SuccessiveResult:
    """Per-excursion first-passage times, roots, and drift reductions.

    drifts[k] is a*b times the compensator power sum over ids retired
    before excursion k started (strictly increasing in k); mass is
    times * meanW when a mean weight was supplied.
    """
    times: np.ndarray
    roots: np.ndarray
    drifts: np.ndarray
    truncated: bool
    convention: str
    mass: Optional[np.ndarray] = None


def _successive_exact(params, clocks, n_excursions, starts, convention):
    """Excursions on one global clock timeline: excursion k occupies the
    window [tau_k, tau_k + H_k); a clock ringing inside a window jumps in
    that excursion and is retired; roots are retired on selection.  By
    memorylessness this matches drawing fresh clocks per excursion."""
    K = params.K
    jumps = params.jump_sizes(convention)
    comp = params.a * params.b * np.power(
        np.arange(1, K + 1, dtype=np.float64), -2.0 * params.alpha)
    slope = params.drift_slope()
    if slope >= 0.0:
        raise ValueError(f"drift slope {slope:.4g} is not negative")
    used = np.zeros(K, dtype=bool)
    sumd = 0.0
    tau = 0.0
    out_h = np.empty(n_excursions)
    out_root = np.empty(n_excursions, dtype=np.int64)
    out_d = np.empty(n_excursions)
    for k in range(n_excursions):
        if starts is not None:
            root = int(starts[k])
            if not (1 <= root <= K):
                raise ValueError(f"root id {root} outside 1..{K}")
            if used[root - 1]:
                raise ValueError(f"root id {root} already used")
        else:
            free = np.flatnonzero(~used)
            if free.size == 0:
                raise ValueError("all limit ids used; no root available")
            root = int(free[0]) + 1
        out_d[k] = sumd
        used[root - 1] = True
        sumd += comp[root - 1]
        live = np.flatnonzero(~used[1:])        # clock ids live = idx+2
        loc = clocks.first[live] - tau
        sel = loc >= 0.0
        loc = loc[sel]
        live = live[sel]
        order = np.argsort(loc, kind="stable")
        loc = loc[order]
        ev_jump = jumps[live[order]]
        v0 = params.root_offset(root)
        starts_t = np.concatenate(([0.0], loc))
        vals = v0 + slope * starts_t + np.concatenate(
            ([0.0], np.cumsum(ev_jump)))
        ends = np.concatenate((loc, [np.inf]))
        cross = vals + slope * (ends - starts_t) <= 0.0
        j = int(np.argmax(cross))               # guaranteed: last is True
        h = float(starts_t[j] + vals[j] / (-slope))
        rang = live[order][loc < h]             # clocks that rang pre-crossing
        used[rang + 1] = True
        sumd += float(comp[rang + 1].sum())
        out_h[k] = h
        out_root[k] = root
        tau += h
    return out_h, out_root, out_d, False


def successive_hitting(params: LevyParams, stream: Optional[Stream] = None,
                       n_excursions: int = 3,
                       convention: str = "size_rate",
                       clocks: Optional[ClockSet] = None,
                       starts=None, meanW: Optional[float] = None,
                       horizon: Optional[float] = None,
                       max_doublings: int = 4) -> SuccessiveResult:
    """First-passage times of successive excursions.

    Excursion k is rooted at the smallest unused limit id (or at
    `starts[k]`), starts at b*root^-alpha, and shares the retired-id set
    with all earlier excursions.  With a materialized `clocks` set the
    excursions are solved exactly on one global timeline (and the first
    excursion with default roots reproduces
    hitting_time(thinned_path(...)) on those clocks); with a `stream` they
    are generated event-by-event.
    """
    _check_convention(convention)
    if n_excursions < 1:
        raise ValueError("n_excursions must be >= 1")
    if clocks is not None:
        if clocks.K != params.K:
            raise ValueError("clock set truncation differs from params")
        h, roots, drifts, trunc = _successive_exact(
            params, clocks, n_excursions, starts, convention)
    else:
        if stream is None:
            raise ValueError("need a stream or a clock set")
        if starts is not None:
            raise ValueError("explicit starts need a materialized clock set")
        K = params.K
        ids = np.arange(1, K + 1, dtype=np.float64)
        rates = np.power(ids, -params.alpha)
        rates *= params.a if convention == "size_rate" else params.b
        rates[0] = 0.0                          # the first id never rings
        jumps = np.power(ids, -params.alpha)
        jumps *= params.b if convention == "size_rate" else params.a
        comp = params.a * params.b * np.power(ids, -2.0 * params.alpha)
        roots_off = params.b * np.power(ids, -params.alpha)
        slope = params.drift_slope()
        if slope >= 0.0:
            raise ValueError(f"drift slope {slope:.4g} is not negative")
        r_total = float(rates.sum())
        if r_total == 0.0:
            # K = 1: no clock ever rings, every excursion is pure drift
            if n_excursions > K:
                raise ValueError("all limit ids used; no root available")
            ids_used = np.arange(1, n_excursions + 1)
            h = roots_off[:n_excursions] / (-slope)
            drifts = np.concatenate(([0.0], np.cumsum(comp[:n_excursions])))
            return SuccessiveResult(
                times=h, roots=ids_used.astype(np.int64),
                drifts=drifts[:n_excursions], truncated=False,
                convention=convention,
                mass=None if meanW is None else h * meanW)
        prob, alias = _kernels.alias_build(rates)
        t_max = horizon if horizon is not None else \
            default_horizon(params) * n_excursions
        h = roots = drifts = None
        trunc = True
        for _ in range(max_doublings + 1):
            used = np.zeros(K, dtype=np.uint8)
            out_h = np.empty(n_excursions)
            out_root = np.empty(n_excursions, dtype=np.int64)
            out_d = np.empty(n_excursions)
            count, truncated = _kernels.successive_scan(
                stream.state, prob, alias, jumps, comp, r_total, slope,
                roots_off, used, K, n_excursions, t_max, out_h, out_root,
                out_d)
            if truncated == 0:
                h, roots, drifts = out_h[:count], out_root[:count], \
                    out_d[:count]
                trunc = False
                break
            t_max *= 2.0
        if trunc:
            h, roots, drifts = out_h[:count], out_root[:count], out_d[:count]
    return SuccessiveResult(
        times=h, roots=roots, drifts=drifts, truncated=trunc,
        convention=convention,
        mass=None if meanW is None else h * meanW)


# ---------------------------------------------------------------------------
# Laplace exponent and the truncation mean deficit

@dataclass(frozen=True)
class SeriesValue:
    value: float
    error_bound: float
    terms: int


def _paired_tail(co: float, ci: float, s: float, alpha: float, i_start: int,
                 tol: float) -> SeriesValue:
    """sum_{i>=i_start} co*i^-alpha*(1 - exp(-s*ci*i^-alpha) - s*ci*i^-alpha).

    Terms are summed directly while x = s*ci*i^-alpha > 1/2; the rest of the
    series is regrouped by powers of x, each power summed exactly by a
    Hurwitz zeta, leaving an alternating series whose truncation error is
    below the first omitted term.
    """
    if s == 0.0:
        return SeriesValue(0.0, 0.0, 0)
    direct_to = max(i_start - 1, int(math.ceil((2.0 * s * ci) ** (1.0 / alpha))))
    total = 0.0
    terms = 0
    i0 = i_start
    while i0 <= direct_to:
        i1 = min(direct_to, i0 + 10_000_000 - 1)
        ivals = np.arange(i0, i1 + 1, dtype=np.float64)
        x = s * ci * np.power(ivals, -alpha)
        block = co * np.power(ivals, -alpha) * (-np.expm1(-x) - x)
        total += float(block.sum())
        terms += ivals.shape[0]
        i0 = i1 + 1
    # tail: 1 - e^-x - x = sum_{k>=2} (-1)^(k+1) x^k / k!, x <= 1/2 here
    base = s * ci
    tail_start = direct_to + 1
    k = 2
    coeff = base * base / 2.0                   # base^k / k!
    bound = math.inf
    while True:
        pk = float(_hurwitz_zeta(alpha * (k + 1), tail_start))
        term = co * coeff * pk
        if k % 2 == 0:
            total -= term
        else:
            total += term
        terms += 1
        k += 1
        coeff *= base / k
        nxt = co * coeff * float(_hurwitz_zeta(alpha * (k + 1), tail_start))
        if nxt <= tol or k > 200:
            bound = nxt
            break
    return SeriesValue(total, bound, terms)


def levy_exponent(params: LevyParams, vartheta: float,
                  tol: float = 1e-10) -> SeriesValue:
    """psi(theta) = c*theta
                    + sum_{i>=2} a i^-alpha (1 - e^(-theta b i^-alpha)
                                               - theta b i^-alpha),
    for the untruncated process; every series term is <= 0, so
    psi(theta) <= c*theta.  The linear coefficient is c itself: the i=1
    clock contributes no jump term (its arrival is the start value b) and
    its compensator is already inside c.  The reported error bound covers
    the series-tail truncation."""
    if vartheta < 0.0:
        raise ValueError("vartheta must be >= 0")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    linear = params.c * vartheta
    if vartheta == 0.0:
        return SeriesValue(0.0, 0.0, 0)
    tail = _paired_tail(params.a, params.b, vartheta, params.alpha, 2, tol)
    return SeriesValue(linear + tail.value, tail.error_bound, tail.terms)


def mean_deficit(params: LevyParams, t: float,
                 tol: float = 1e-10) -> SeriesValue:
    """E[untruncated - truncated] path value at time t (a <= 0 quantity):
    b * sum_{i>K} i^-alpha (1 - e^(-a t i^-alpha) - a t i^-alpha).

    The jump/compensator pairs dropped by the truncation have summable
    means; this evaluates their total, the dominant truncation bias."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    return _paired_tail(params.b, params.a, t, params.alpha,
                        params.K + 1, tol)


# ---------------------------------------------------------------------------
# Characteristic-function product and density-bound envelope

@dataclass(frozen=True)
class CharFn:
    value: complex
    modulus: float
    envelope: float
    j_theta: int


def char_fn(t: float, vartheta: float, K: int, alpha: float) -> CharFn:
    """Characteristic factor product of the unit-coefficient process at time
    t, over modes j = 2..K, together with the analytic modulus envelope
    exp(-t * Phi(vartheta)).

    Phi sums j^-alpha e^(-2 t j^-alpha) (1 - cos(vartheta j^-alpha)) over
    j >= j_theta = max(2, ceil((2 vartheta / pi)^(1/alpha))); the modulus
    obeys |f| <= exp(-t Phi) for every truncation."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    if K < 2:
        raise ValueError("K must be >= 2")
    th = abs(float(vartheta))
    log_sum = 0.0 + 0.0j
    phi = 0.0
    j_theta = max(2, int(math.ceil((2.0 * th / math.pi) ** (1.0 / alpha))))
    for j0 in range(2, K + 1, 1 << 20):
        j1 = min(K, j0 + (1 << 20) - 1)
        j = np.arange(j0, j1 + 1, dtype=np.float64)
        ja = np.power(j, -alpha)
        p = -np.expm1(-ja * t)                  # P(clock j rang by t)
        factor = 1.0 + (np.exp(1j * vartheta * ja) - 1.0) * p
        factor *= np.exp(-1j * vartheta * t * ja * ja)
        log_sum += complex(np.log(factor).sum())
        mask = j >= j_theta
        if mask.any():
            phi += float((ja * np.exp(-2.0 * t * ja)
                          * (1.0 - np.cos(vartheta * ja)))[mask].sum())
    value = complex(np.exp(log_sum))
    return CharFn(value=value, modulus=float(math.exp(log_sum.real)),
                  envelope=float(math.exp(-t * phi)), j_theta=j_theta)


# ---------------------------------------------------------------------------
# Truncation stability

def truncation_gap(params: LevyParams, stream: Stream, horizon: float,
                   convention: str = "size_rate") -> float:
    """sup_{t<=horizon} |S^(K) - S^(2K)| on shared clocks.

    The K-truncated path misses the jumps and compensators of clocks
    K+1..2K; on shared clocks the difference is piecewise linear, rising at
    the dropped compensator rate and dropping at each extra clock's ring, so
    the supremum sits at pre-ring instants or the horizon."""
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    wide = LevyParams(a=params.a, b=params.b, c=params.c,
                      alpha=params.alpha, K=2 * params.K)
    clocks = sample_clocks(wide, stream, convention=convention)
    extra = slice(params.K - 1, None)           # ids K+1..2K
    e_first = clocks.first[extra]
    e_jump = wide.jump_sizes(convention)[extra]
    rise = params.a * params.b * (
        _powsum(2.0 * params.alpha, 2 * params.K)
        - _powsum(2.0 * params.alpha, params.K))
    sel = e_first <= horizon
    times = e_first[sel]
    jumps = e_jump[sel]
    order = np.argsort(times, kind="stable")
    times = times[order]
    jumps = jumps[order]
    cum0 = np.concatenate(([0.0], np.cumsum(jumps)))
    pre = rise * times - cum0[:-1]              # just before each ring
    post = rise * times - cum0[1:]              # just after
    end = rise * horizon - cum0[-1]
    hi = max(float(pre.max()) if pre.size else 0.0, end, 0.0)
    lo = min(float(post.min()) if post.size else 0.0, end, 0.0)
    return max(hi, -lo)
