"""Scalar hot loops: RNG core, discrete sampling, walks, event scans.

Single-source kernels.  Each function below is plain Python operating on numpy
arrays and Python scalars, written so that numba's nopython mode accepts it
unchanged.  At import time (unless ``CRITGRAPH_NUMBA=0``) `activate_jit`
rebinds the module globals to compiled dispatchers; cross-kernel calls resolve
through those globals at first compile, so both backends run the same code.

Callers must access kernels as module attributes (``_kernels.foo``), never via
``from ._kernels import foo``, or they may capture the uncompiled version.

Conventions: all vertex/mark indices inside kernels are 0-based; wrappers
translate to the public 1-based ids.  RNG state is the 6-word float64 vector
from `_rng.Stream`; uniforms are in (0, 1].
"""

import math
import os

import numpy as np

# ---------------------------------------------------------------------------
# RNG core: MRG32k3a (all arithmetic exact in float64)

_MRG_M1 = 4294967087.0
_MRG_M2 = 4294944443.0
_MRG_NORM = 1.0 / 4294967088.0


def mrg_next(state):
    """Advance the 6-word MRG32k3a state; return a uniform in (0, 1]."""
    p1 = (1403580.0 * state[1] - 810728.0 * state[0]) % _MRG_M1
    state[0] = state[1]
    state[1] = state[2]
    state[2] = p1
    p2 = (527612.0 * state[5] - 1370589.0 * state[3]) % _MRG_M2
    state[3] = state[4]
    state[4] = state[5]
    state[5] = p2
    v = (p1 - p2) % _MRG_M1
    return (v + 1.0) * _MRG_NORM


def fill_uniforms(state, out):
    for i in range(out.shape[0]):
        out[i] = mrg_next(state)


def fill_exponentials(state, rates, out):
    for i in range(out.shape[0]):
        out[i] = -math.log(mrg_next(state)) / rates[i]


def rng_poisson(state, lam):
    """Exact Poisson draw: multiplication method below 10, PTRS above."""
    if lam <= 0.0:
        return 0
    if lam < 10.0:
        enlam = math.exp(-lam)
        k = 0
        prod = 1.0
        while True:
            prod *= mrg_next(state)
            if prod <= enlam:
                return k
            k += 1
    # Hormann's transformed rejection (PTRS)
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = mrg_next(state) - 0.5
        v = mrg_next(state)
        us = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / us + b) * u + lam + 0.43))
        if us >= 0.07 and v <= vr:
            return k
        if k < 0:
            continue
        if us < 0.013 and v > us:
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= k * loglam - lam - math.lgamma(k + 1.0)):
            return k


# ---------------------------------------------------------------------------
# Alias table (Vose) for size-biased discrete draws

def alias_build(weights):
    """Build (prob, alias) for O(1) draws proportional to `weights` (>= 0)."""
    n = weights.shape[0]
    prob = np.empty(n, dtype=np.float64)
    alias = np.zeros(n, dtype=np.int64)
    total = 0.0
    for i in range(n):
        total += weights[i]
    if total <= 0.0:
        raise ValueError("alias_build needs a positive total weight")
    q = np.empty(n, dtype=np.float64)
    for i in range(n):
        q[i] = weights[i] * n / total
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = 0
    nl = 0
    for i in range(n):
        if q[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        nl -= 1
        s = small[ns]
        g = large[nl]
        prob[s] = q[s]
        alias[s] = g
        q[g] = q[g] - (1.0 - q[s])
        if q[g] < 1.0:
            small[ns] = g
            ns += 1
        else:
            large[nl] = g
            nl += 1
    while nl > 0:
        nl -= 1
        prob[large[nl]] = 1.0
    while ns > 0:
        ns -= 1
        prob[small[ns]] = 1.0
    # Exact-zero weights must never be drawn.  A zero cell enters the small
    # stack with q = 0 and leaves the main loop with prob 0 and a positive
    # alias, which is exact; only a cell stranded by the roundoff patch
    # above (prob forced to 1) could self-draw, so repair just those,
    # handing the stray <= 1/n slot mass to the heaviest index.
    big = 0
    for i in range(n):
        if weights[i] > weights[big]:
            big = i
    if weights[big] > 0.0:
        for i in range(n):
            if weights[i] == 0.0 and prob[i] != 0.0:
                prob[i] = 0.0
                alias[i] = big
    return prob, alias


def alias_draw(state, prob, alias):
    n = prob.shape[0]
    i = int(mrg_next(state) * n)
    if i >= n:
        i = n - 1
    if mrg_next(state) < prob[i]:
        return i
    return alias[i]


# ---------------------------------------------------------------------------
# Graph generation and components

def dense_pairs(state, wbar, ell, kernel_code, out_i, out_j):
    """Pairwise Bernoulli edges; kernel_code 0=exp, 1=capped product, 2=ratio.

    Writes 1-based endpoint pairs, returns the edge count.
    """
    n = wbar.shape[0]
    cnt = 0
    for i in range(n - 1):
        wi = wbar[i]
        for j in range(i + 1, n):
            x = wi * wbar[j] / ell
            if kernel_code == 0:
                p = 1.0 - math.exp(-x)
            elif kernel_code == 1:
                p = x if x < 1.0 else 1.0
            else:
                p = x / (1.0 + x)
            if mrg_next(state) < p:
                out_i[cnt] = i + 1
                out_j[cnt] = j + 1
                cnt += 1
    return cnt


def sparse_pairs(state, prob, alias, m, out_i, out_j):
    """m size-biased endpoint pairs, self-loops dropped, 1-based, i < j."""
    cnt = 0
    for _ in range(m):
        a = alias_draw(state, prob, alias)
        b = alias_draw(state, prob, alias)
        if a != b:
            if a < b:
                out_i[cnt] = a + 1
                out_j[cnt] = b + 1
            else:
                out_i[cnt] = b + 1
                out_j[cnt] = a + 1
            cnt += 1
    return cnt


def uf_components(n, src, dst):
    """Union-find over 1-based edges; labels[v] = smallest vertex of v's
    component (union by smaller root, path halving)."""
    parent = np.arange(n + 1)
    for e in range(src.shape[0]):
        a = src[e]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = dst[e]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a < b:
            parent[b] = a
        elif b < a:
            parent[a] = b
    labels = np.empty(n + 1, dtype=np.int64)
    labels[0] = 0
    for v in range(1, n + 1):
        r = v
        while parent[r] != r:
            r = parent[r]
        labels[v] = r
        x = v
        while parent[x] != r:
            nxt = parent[x]
            parent[x] = r
            x = nxt
    return labels


# ---------------------------------------------------------------------------
# Exploration walk (cluster of a vertex, breadth-first mark order)

def explore_walk(state, wbar, prob, alias, start0, scale, visited, cap,
                 members, record, marks, jflags, zvals, svals):
    """Walk Z_l = Z_{l-1} + X_l - 1 from Z_0 = 1 until Z hits 0 or `cap`.

    Marks are size-biased over `wbar`; entries of `visited` equal to 2 are
    excluded from the mark law (rejection), entries equal to 1 are re-hits and
    contribute a thinned step (no offspring, no member).  Offspring of a kept
    mark are Poisson with mean wbar[mark]*scale.  The walk marks its members
    with 1 in `visited` and lists them (0-based) in `members`.

    Returns (steps, size, weight, s_final, thinned, hit_cap).
    """
    visited[start0] = 1
    members[0] = start0
    msize = 1
    weight = wbar[start0]
    z = rng_poisson(state, wbar[start0] * scale)
    s = wbar[start0] * scale
    steps = 1
    thinned = 0
    if record == 1:
        zvals[0] = 1
        zvals[1] = z
        svals[0] = 1.0
        svals[1] = s
        marks[0] = start0
        jflags[0] = 1
    while z > 0 and steps < cap:
        while True:
            idx = alias_draw(state, prob, alias)
            if visited[idx] != 2:
                break
        steps += 1
        if visited[idx] == 1:
            thinned += 1
            j = 0
            x = 0
        else:
            j = 1
            visited[idx] = 1
            members[msize] = idx
            msize += 1
            weight += wbar[idx]
            x = rng_poisson(state, wbar[idx] * scale)
        z += x - 1
        s += wbar[idx] * scale * j - 1.0
        if record == 1:
            marks[steps - 1] = idx
            jflags[steps - 1] = j
            zvals[steps] = z
            svals[steps] = s
    hit_cap = 1 if z > 0 else 0
    return steps, msize, weight, s, thinned, hit_cap


def progeny_walk(state, wbar, prob, alias, root0, cap):
    """Total progeny walk of the mixed-Poisson branching process.

    root0 >= 0 roots the tree at that vertex; root0 < 0 draws a size-biased
    root mark.  Returns (total, total_weight, hit_cap).
    """
    if root0 >= 0:
        w0 = wbar[root0]
    else:
        w0 = wbar[alias_draw(state, prob, alias)]
    total = 1
    wtot = w0
    z = rng_poisson(state, w0)
    while z > 0 and total < cap:
        idx = alias_draw(state, prob, alias)
        total += 1
        wtot += wbar[idx]
        z += rng_poisson(state, wbar[idx]) - 1
    return total, wtot, (1 if z > 0 else 0)


def coupled_walk(state, wbar, prob, alias, start0, cap, qalive, visited):
    """Branching process and pruned cluster from one draw sequence.

    FIFO queue of pending checks (`qalive` holds the alive flags); a check is
    alive iff its parent was alive and its mark had not been seen among alive
    checks before.  Alive checks form the cluster of start0; all checks form
    the branching tree, so total >= cluster size and total weight >= cluster
    weight hold pathwise.  `visited` must be zeroed by the caller.

    Returns (total, total_weight, cluster_size, cluster_weight, capped) where
    capped is 0 (complete), 1 (check cap hit) or 2 (queue overflow).
    """
    head = 0
    tail = 1
    qalive[0] = 1
    qcap = qalive.shape[0]
    t = 0
    wt = 0.0
    csize = 0
    cweight = 0.0
    capped = 0
    while head < tail:
        if t >= cap:
            capped = 1
            break
        alive = qalive[head]
        head += 1
        if t == 0:
            m = start0
        else:
            m = alias_draw(state, prob, alias)
        t += 1
        wt += wbar[m]
        member = 0
        if alive == 1 and visited[m] == 0:
            member = 1
            visited[m] = 1
            csize += 1
            cweight += wbar[m]
        x = rng_poisson(state, wbar[m])
        for _ in range(x):
            if tail >= qcap:
                capped = 2
                break
            qalive[tail] = member
            tail += 1
        if capped == 2:
            break
    return t, wt, csize, cweight, capped


# ---------------------------------------------------------------------------
# Event scans for pure-jump paths with negative drift
#
# All three scans draw arrivals from one superposed Poisson stream at rate
# r_total, then draw the mark identity from an alias table proportional to the
# per-mark rates.  Discarding repeat marks reproduces independent
# first-arrival (exponential) clocks exactly; keeping repeats gives the
# dominating path with full Poisson streams.

def levy_hit_scan(state, prob, alias, jumps, r_total, slope, v0, horizon,
                  fired, epoch, thin):
    """First passage of v below 0; v starts at v0, drifts at slope (< 0) and
    jumps by jumps[mark].  thin=1 keeps only first arrivals per mark.
    Returns the hitting time, or -1.0 if none occurs by `horizon`."""
    t = 0.0
    v = v0
    while True:
        dt = -math.log(mrg_next(state)) / r_total
        if v + slope * dt <= 0.0:
            h = t + v / (-slope)
            if h <= horizon:
                return h
            return -1.0
        t += dt
        if t > horizon:
            return -1.0
        v += slope * dt
        qi = alias_draw(state, prob, alias)
        if thin == 0 or fired[qi] != epoch:
            fired[qi] = epoch
            v += jumps[qi]


def successive_scan(state, prob, alias, jumps, comp, r_total, slope,
                    root_offsets, used, max_root, n_excursions, horizon_max,
                    out_h, out_root, out_dsum):
    """Successive first-passage excursions with a shared used-mark set.

    Excursion k starts at root_offsets[r] where r is the smallest unused mark
    index below max_root; marks hit during any excursion join the used set and
    never jump again.  out_dsum[k] gets the sum of comp[] over marks used
    before excursion k started (its drift reduction).  Returns
    (count, truncated) where truncated=1 means an excursion failed to cross by
    horizon_max (results past it are undefined).
    """
    nfound = 0
    next_root = 0
    sumd = 0.0
    while nfound < n_excursions:
        while next_root < max_root and used[next_root] == 1:
            next_root += 1
        if next_root >= max_root:
            return nfound, 0
        root = next_root
        out_dsum[nfound] = sumd
        used[root] = 1
        sumd += comp[root]
        v = root_offsets[root]
        t = 0.0
        while True:
            dt = -math.log(mrg_next(state)) / r_total
            if v + slope * dt <= 0.0:
                h = t + v / (-slope)
                if h > horizon_max:
                    return nfound, 1
                out_h[nfound] = h
                out_root[nfound] = root + 1
                nfound += 1
                break
            t += dt
            if t > horizon_max:
                return nfound, 1
            v += slope * dt
            qi = alias_draw(state, prob, alias)
            if used[qi] == 0:
                used[qi] = 1
                sumd += comp[qi]
                v += jumps[qi]
    return nfound, 0


def excursion_scan(state, prob, alias, jumps, r_total, slope, horizon, fired,
                   epoch, out_len, min_len):
    """Excursion lengths above the running minimum of a one-jump-per-mark
    path started at 0 with drift `slope` (< 0).  Lengths below min_len are
    dropped.  Returns (count, open_flag)."""
    t = 0.0
    v = 0.0
    m = 0.0
    on_min = 1
    exc_start = 0.0
    count = 0
    nfired = 0
    nmarks = jumps.shape[0]
    cap = out_len.shape[0]
    while True:
        dt = -math.log(mrg_next(state)) / r_total
        t_arr = t + dt
        t_stop = t_arr
        if t_stop > horizon:
            t_stop = horizon
        seg = t_stop - t
        if on_min == 1:
            v += slope * seg
            m = v
        else:
            v2 = v + slope * seg
            if v2 <= m:
                hit = t + (v - m) / (-slope)
                ln = hit - exc_start
                if ln >= min_len and count < cap:
                    out_len[count] = ln
                    count += 1
                on_min = 1
                v = m + slope * (t_stop - hit)
                m = v
            else:
                v = v2
        t = t_stop
        if t >= horizon:
            return count, (0 if on_min == 1 else 1)
        if nfired == nmarks and on_min == 1:
            return count, 0
        qi = alias_draw(state, prob, alias)
        if fired[qi] != epoch:
            fired[qi] = epoch
            nfired += 1
            if on_min == 1:
                exc_start = t
                on_min = 0
            v += jumps[qi]


# ---------------------------------------------------------------------------
# Backend activation

_KERNEL_NAMES = [
    "mrg_next", "fill_uniforms", "fill_exponentials", "rng_poisson",
    "alias_build", "alias_draw", "dense_pairs", "sparse_pairs",
    "uf_components", "explore_walk", "progeny_walk", "coupled_walk",
    "levy_hit_scan", "successive_scan", "excursion_scan",
]

_JIT_ACTIVE = False


def jit_active() -> bool:
    return _JIT_ACTIVE


def activate_jit() -> bool:
    """Rebind all kernels to numba dispatchers.  Idempotent; returns success."""
    global _JIT_ACTIVE
    if _JIT_ACTIVE:
        return True
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        return False
    g = globals()
    for name in _KERNEL_NAMES:
        g[name] = numba.njit(cache=True, nogil=True)(g[name])
    _JIT_ACTIVE = True
    return True


if os.environ.get("CRITGRAPH_NUMBA", "1") != "0":
    activate_jit()
