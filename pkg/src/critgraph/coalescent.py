"""Finite multiplicative coalescent and its excursion representation.

Masses merge pairwise at rate x_i*x_j; the chain is simulated as one global
exponential race.  Entrance-boundary statistics measure how close a mass
vector sits to the heavy-tailed entrance family (d_j), and the excursion
representation realizes the limit masses as ordered excursion lengths of a
reflected drift-plus-jumps path.

Matching the excursion path to the first-passage excursions of the levy
module is a pure space rescaling by 1/meanW: jumps b*j^-alpha become
d_j = a*j^-alpha (equal to the clock rates), and the drift argument becomes
beta = theta/meanW, so that beta - sum_j c_j^2 equals the levy module's
inter-event slope divided by meanW.  Excursion lengths live on the time
axis, so they are left unchanged by the rescaling;
`matched_excursion_params` packages this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from ._rng import Stream
from .model import LimitParams


@dataclass
class MassVector:
    """Descending non-negative masses with cached power sums."""
    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=np.float64)
        if m.ndim != 1:
            raise ValueError("masses must be a 1-d sequence")
        if m.size and float(m.min()) < 0.0:
            raise ValueError("masses must be non-negative")
        self.masses = np.sort(m)[::-1].copy()
        self._s2 = float(np.sum(self.masses ** 2))
        self._s3 = float(np.sum(self.masses ** 3))

    @property
    def sigma2(self) -> float:
        return self._s2

    @property
    def sigma3(self) -> float:
        return self._s3

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def __len__(self) -> int:
        return self.masses.shape[0]


def sigma_r(x: MassVector, r: int) -> float:
    """Power sum sum_j x_j^r for r = 2 or 3."""
    if r == 2:
        return x.sigma2
    if r == 3:
        return x.sigma3
    raise ValueError("r must be 2 or 3")


def simulate_masses(x0: MassVector, t: float, stream: Stream) -> MassVector:
    """Run the merge chain for time t.

    One global race: the next merge happens after Exp((sigma1^2-sigma2)/2)
    and the pair is drawn size-biased twice, rejecting equal picks — the
    accepted unordered pair {i,j} has probability proportional to x_i*x_j.
    """
    if t < 0.0:
        raise ValueError("t must be >= 0")
    masses = [float(v) for v in x0.masses]
    s1 = math.fsum(masses)
    s2 = math.fsum(v * v for v in masses)
    tcur = 0.0
    while len(masses) > 1:
        rate = 0.5 * (s1 * s1 - s2)
        if rate <= 0.0:
            break                       # at most one positive mass left
        tcur += stream.exponential(rate)
        if tcur > t:
            break
        cum = np.cumsum(masses)
        total = cum[-1]
        while True:
            i = int(np.searchsorted(cum, stream.u01() * total))
            j = int(np.searchsorted(cum, stream.u01() * total))
            if i != j:
                break
        xi, xj = masses[i], masses[j]
        if i < j:
            i, j = j, i
        del masses[i]                   # the larger index first
        del masses[j]
        merged = xi + xj
        masses.append(merged)
        s2 += merged * merged - xi * xi - xj * xj
    return MassVector(np.array(masses, dtype=np.float64))


@dataclass(frozen=True)
class EntranceStats:
    """Entrance-boundary statistics of a mass vector at window lambda_n.

    cond_a -> -beta, cond_b[j-1] -> d_j, cond_c -> sum d_j^3 as the vector
    approaches the heavy-tailed entrance family.
    """
    lam: float
    cond_a: float
    cond_b: np.ndarray
    cond_c: float
    target_a: float
    target_b: np.ndarray
    target_c: float


def entrance_conditions(x: MassVector, lambda_n: float, params: LimitParams,
                        jmax: int = 3) -> EntranceStats:
    s2 = x.sigma2
    if s2 <= 0.0:
        raise ValueError("entrance conditions need sigma2 > 0")
    if jmax < 1:
        raise ValueError("jmax must be >= 1")
    al = abs(lambda_n)
    top = np.zeros(jmax)
    k = min(jmax, len(x))
    top[:k] = x.masses[:k]
    j = np.arange(1, jmax + 1)
    return EntranceStats(
        lam=lambda_n,
        cond_a=al * (al * s2 - 1.0),
        cond_b=top / s2,
        cond_c=al ** 3 * x.sigma3,
        target_a=-params.beta,
        target_b=np.asarray(params.dj(j), dtype=np.float64),
        target_c=params.sum_dj3(),
    )


# ---------------------------------------------------------------------------
# Excursion representation

@dataclass
class ExcursionLengths:
    lengths: np.ndarray         # sorted descending
    open_dropped: bool          # horizon cut through a running excursion
    slope: float
    horizon: float


def excursion_lengths(cvec: np.ndarray, beta: float, horizon: float,
                      stream: Stream,
                      min_len: float = 1e-12) -> ExcursionLengths:
    """Ordered excursion lengths above past minima of the reflected path.

    The path drifts at beta - sum(c_j^2) (must be negative) and jumps by c_j
    when clock j ~ Exp(rate c_j) rings, each clock once; the reflection keeps
    it at its running minimum between excursions.  Lengths below `min_len`
    are boundary noise and are dropped; an excursion still open at the
    horizon is dropped and flagged.
    """
    c = np.asarray(cvec, dtype=np.float64)
    if c.ndim != 1 or c.size < 1:
        raise ValueError("cvec must be a non-empty 1-d sequence")
    if np.any(c <= 0.0) or np.any(np.diff(c) > 0.0):
        raise ValueError("cvec entries must be positive and non-increasing")
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    slope = beta - float(c @ c)
    if slope >= 0.0:
        raise ValueError(f"drift beta - sum c^2 = {slope:.4g} must be "
                         "negative")
    prob, alias = _kernels.alias_build(c)
    r_total = float(c.sum())
    fired = np.zeros(c.shape[0], dtype=np.int64)
    out = np.empty(c.shape[0] + 1, dtype=np.float64)
    count, open_flag = _kernels.excursion_scan(
        stream.state, prob, alias, c, r_total, slope, horizon, fired, 1,
        out, min_len)
    lengths = np.sort(out[:count])[::-1].copy()
    return ExcursionLengths(lengths=lengths, open_dropped=bool(open_flag),
                            slope=slope, horizon=horizon)


def matched_excursion_params(params: LimitParams, J: int):
    """(cvec, beta) under which excursion lengths match the ordered
    first-passage times of the levy module's successive excursions with
    truncation K = J: cvec_j = d_j = a*j^-alpha and beta = theta/meanW
    (the drift of the space-rescaled path before its compensators, which
    the excursion scan subtracts as sum_j c_j^2)."""
    if J < 1:
        raise ValueError("J must be >= 1")
    j = np.arange(1, J + 1)
    return (np.asarray(params.dj(j), dtype=np.float64),
            params.theta / params.mean_w)
