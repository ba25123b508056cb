"""Mixed-Poisson branching walks dominating the cluster exploration.

The total-progeny walk repeats the cluster walk's step law — size-biased
marks, Poi(w_mark) offspring — but never thins, so its population and weight
dominate the cluster's.  Closed-form moments of the total progeny make the
simulations checkable, and the same first-moment formula yields the
subcritical cluster-size prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from ._rng import Stream
from .model import WeightSequence, apply_window, nu_n

# Geometric tail of the total progeny keeps the truncation bias of moment
# estimates below ~1e-6 of E[T] for nu_n <= 0.9 at this cap.
DEFAULT_CAP = 1_000_000


@dataclass
class BPOutcome:
    """One total-progeny realization: population, total weight, cap flag."""
    total: int
    weight: float
    capped: bool


def simulate_progeny(ws: WeightSequence, stream: Stream,
                     root: Optional[int] = None,
                     cap: int = DEFAULT_CAP) -> BPOutcome:
    """Run the walk to its first return to zero (or to `cap` individuals).

    `root=None` draws the root as a size-biased mark (the unconditioned
    walk); `root=i` fixes the root vertex, whose offspring count is
    Poi(w_i).  Capped outcomes should be excluded from moment estimates.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if root is None:
        root0 = -1
    else:
        if not (1 <= root <= ws.n):
            raise ValueError(f"root vertex {root} outside 1..{ws.n}")
        root0 = root - 1
    prob, alias = ws.alias_tables()
    total, wtot, hit = _kernels.progeny_walk(
        stream.state, ws.weights, prob, alias, root0, cap)
    return BPOutcome(total=int(total), weight=float(wtot), capped=bool(hit))


@dataclass(frozen=True)
class ProgenyMoments:
    """Exact low-order moments of the total progeny and its weight.

    The unrooted block (et..ewt2) is for a size-biased root; the rooted
    block (eti..ewti2) is filled when a root vertex was supplied.
    """
    nu: float
    s3: float                   # sum w^3 / sum w
    et: float                   # E[T]
    et2: float                  # E[T^2]
    ewt: float                  # E[w_T]
    ewt2: float                 # E[w_T^2]
    root: Optional[int] = None
    eti: Optional[float] = None
    eti2: Optional[float] = None
    ewti: Optional[float] = None
    ewti2: Optional[float] = None

    def rows(self):
        """(name, value) pairs in a fixed order, for tabular export."""
        out = [("E[T]", self.et), ("E[T^2]", self.et2),
               ("E[wT]", self.ewt), ("E[wT^2]", self.ewt2)]
        if self.root is not None:
            out += [(f"E[T({self.root})]", self.eti),
                    (f"E[T({self.root})^2]", self.eti2),
                    (f"E[wT({self.root})]", self.ewti),
                    (f"E[wT({self.root})^2]", self.ewti2)]
        return out


def progeny_moments(ws: WeightSequence,
                    i: Optional[int] = None) -> ProgenyMoments:
    """Closed-form progeny moments; refuses non-subcritical sequences."""
    nu = nu_n(ws)
    if nu >= 1.0:
        raise ValueError(
            f"progeny moments need a subcritical walk (nu_n = {nu:.6f} >= 1)")
    g = 1.0 - nu
    s3 = ws.sum_w3 / ws.ell
    et = 1.0 / g
    et2 = (1.0 + nu) / g ** 2 + s3 / g ** 3
    ewt = nu / g
    ewt2 = s3 / g ** 3
    if i is None:
        return ProgenyMoments(nu=nu, s3=s3, et=et, et2=et2, ewt=ewt,
                              ewt2=ewt2)
    wi = ws.weight_of(i)
    eti = 1.0 + wi / g
    eti2 = eti ** 2 + wi * (1.0 + nu) / g ** 2 + wi * s3 / g ** 3
    ewti = wi / g
    ewti2 = ewti ** 2 + wi * s3 / g ** 3
    return ProgenyMoments(nu=nu, s3=s3, et=et, et2=et2, ewt=ewt, ewt2=ewt2,
                          root=i, eti=eti, eti2=eti2, ewti=ewti, ewti2=ewti2)


@dataclass(frozen=True)
class SubcriticalPrediction:
    """Two routes to the j-th largest subcritical cluster size."""
    j: int
    lam: float
    nu_lam: float
    finite_n: float             # w_j(lam) / (1 - nu_n(lam))
    limit_form: float           # c_j n^rho / |lam|


def subcritical_prediction(j: int, ws: WeightSequence,
                           lambda_n: float) -> SubcriticalPrediction:
    """Predicted size of the cluster of vertex j deep in the window.

    Returns both the finite-n mean-cluster heuristic w_j(lam)/(1-nu_n(lam))
    and its limit form c_j n^rho/|lam|; the two agree to a factor
    1 + O(n^-eta + 1/|lam|).  `ws` must be the unwindowed (lam = 0)
    sequence; the window is applied here.
    """
    if not (1 <= j <= ws.n):
        raise ValueError(f"vertex {j} outside 1..{ws.n}")
    if ws.lam != 0.0:
        raise ValueError("pass the unwindowed sequence; lambda_n is applied "
                         "here")
    if lambda_n >= 0.0:
        raise ValueError("subcritical window requires lambda_n < 0")
    wsl = apply_window(ws, lambda_n)
    nu = nu_n(wsl)
    if nu >= 1.0:
        raise ValueError(
            f"supercritical window: nu_n(lambda) = {nu:.6f} >= 1")
    finite_n = wsl.weight_of(j) / (1.0 - nu)
    ex = ws.exponents
    # w_j = c_j n^(1-rho) (1+o(1)), so the asymptotic mass coefficient can be
    # read off the sequence itself
    c_j = ws.weight_of(j) * float(ws.n) ** (ex.rho - 1.0)
    limit_form = c_j * float(ws.n) ** ex.rho / abs(lambda_n)
    return SubcriticalPrediction(j=j, lam=lambda_n, nu_lam=nu,
                                 finite_n=finite_n, limit_form=limit_form)


@dataclass
class CoupledGap:
    """Paired progeny/cluster run on one draw sequence.

    The branching walk checks every queued individual; an individual is in
    the cluster iff its parent was and its vertex had not been claimed by
    the cluster before.  Pathwise total >= cluster_size and
    weight >= cluster_weight.  `capped` is 0 (complete), 1 (check cap) or
    2 (queue overflow); capped runs should be dropped from gap statistics.
    """
    start: int
    total: int
    weight: float
    cluster_size: int
    cluster_weight: float
    capped: int

    @property
    def gap_total(self) -> int:
        return self.total - self.cluster_size

    @property
    def gap_weight(self) -> float:
        return self.weight - self.cluster_weight


_QBUF = {}


def _queue_buffer(size: int) -> np.ndarray:
    buf = _QBUF.get("q")
    if buf is None or buf.shape[0] < size:
        buf = np.empty(size, dtype=np.uint8)
        _QBUF["q"] = buf
    return buf


def coupled_gap(ws: WeightSequence, start: int, stream: Stream,
                cap: int = DEFAULT_CAP) -> CoupledGap:
    """Run the dominating walk and the cluster of `start` on shared draws."""
    if not (1 <= start <= ws.n):
        raise ValueError(f"start vertex {start} outside 1..{ws.n}")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    prob, alias = ws.alias_tables()
    qalive = _queue_buffer(4 * cap + 16)
    visited = np.zeros(ws.n, dtype=np.uint8)
    t, wt, csize, cweight, capped = _kernels.coupled_walk(
        stream.state, ws.weights, prob, alias, start - 1, cap, qalive,
        visited)
    return CoupledGap(start=start, total=int(t), weight=float(wt),
                      cluster_size=int(csize), cluster_weight=float(cweight),
                      capped=int(capped))
