"""Weight sequences and limit constants for critical rank-1 random graphs.

Vertex j of an n-vertex graph carries weight w_j = q(j/n) where q is the
quantile of a heavy-tailed law with P(W > x) ~ c_F x^-(tau-1), tau in (3, 4).
At criticality (nu = E[W^2]/E[W] = 1) the interesting scaling happens inside
the critical window: weights (1 + lam * n^-eta) * w_j with
eta = (tau-3)/(tau-1).  This module builds the sequences, evaluates the
finite-n criticality measure nu_n = sum w^2 / sum w, and computes the limit
constants (a, b, c, theta, zeta, beta) that parameterize the scaling limits.

The constant zeta is the n^-eta coefficient of nu_n - 1; it is an alternating
integral-minus-term series evaluated here by direct summation with a
telescoped tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels

__all__ = [
    "Exponents", "TailLaw", "WeightSequence", "ZetaResult", "LimitParams",
    "exponents", "critical_pareto", "build_weights", "apply_window", "nu_n",
    "zeta_series", "limit_params",
]


# ---------------------------------------------------------------------------
# Scaling exponents

@dataclass(frozen=True)
class Exponents:
    """The three scaling exponents of the tau-regime, tau in (3, 4)."""
    tau: float
    alpha: float  # 1/(tau-1): weight scale n^alpha
    rho: float    # (tau-2)/(tau-1): cluster-size scale n^rho
    eta: float    # (tau-3)/(tau-1): critical-window width n^-eta

    def __post_init__(self):
        # alpha + rho = 1 and rho - alpha = eta hold by construction; keep a
        # guard against constructing inconsistent instances by hand.
        if not (abs(self.alpha + self.rho - 1.0) < 1e-12
                and abs(self.rho - self.alpha - self.eta) < 1e-12):
            raise ValueError("inconsistent exponent triple")


def exponents(tau: float) -> Exponents:
    if not (3.0 < tau < 4.0):
        raise ValueError(f"tau must lie in (3, 4), got {tau}")
    return Exponents(
        tau=tau,
        alpha=1.0 / (tau - 1.0),
        rho=(tau - 2.0) / (tau - 1.0),
        eta=(tau - 3.0) / (tau - 1.0),
    )


# ---------------------------------------------------------------------------
# Tail laws

class TailLaw:
    """A weight law given by its (generalized-inverse) quantile function.

    `quantile(u)` is non-increasing on (0, 1]; by convention quantile(1.0) is
    0 exactly, so the smallest of n built weights vanishes.  The tail constant
    cF is the coefficient in P(W > x) ~ cF * x^-(tau-1).
    """

    def __init__(self, tau: float, cF: float, kind: str,
                 scale: Optional[float] = None,
                 fn: Optional[Callable[[float], float]] = None):
        if not (3.0 < tau < 4.0):
            raise ValueError(f"tau must lie in (3, 4), got {tau}")
        if cF <= 0.0:
            raise ValueError("cF must be positive")
        self.tau = tau
        self.cF = cF
        self.kind = kind
        self.scale = scale
        self._fn = fn
        self.exponents = exponents(tau)

    @classmethod
    def pareto(cls, tau: float, scale: float) -> "TailLaw":
        """Pure power law: quantile(u) = scale * u^(-1/(tau-1))."""
        if scale <= 0.0:
            raise ValueError("scale must be positive")
        return cls(tau, scale ** (tau - 1.0), "pareto", scale=scale)

    @classmethod
    def from_quantile(cls, tau: float, cF: float,
                      fn: Callable[[float], float]) -> "TailLaw":
        return cls(tau, cF, "quantile", fn=fn)

    def quantile(self, u: float) -> float:
        if not (0.0 < u <= 1.0):
            raise ValueError(f"quantile argument must lie in (0, 1], got {u}")
        if u == 1.0:
            return 0.0
        if self.kind == "pareto":
            return self.scale * u ** (-1.0 / (self.tau - 1.0))
        return self._fn(u)

    def mean_weight(self) -> float:
        """E[W] = integral of the quantile over (0, 1)."""
        if self.kind == "pareto":
            return self.scale * (self.tau - 1.0) / (self.tau - 2.0)
        from scipy.integrate import quad
        val, _ = quad(self.quantile, 0.0, 1.0, limit=200)
        return val

    def second_moment(self) -> float:
        if self.kind == "pareto":
            return self.scale ** 2 * (self.tau - 1.0) / (self.tau - 3.0)
        from scipy.integrate import quad
        val, _ = quad(lambda u: self.quantile(u) ** 2, 0.0, 1.0, limit=200)
        return val

    def nu(self) -> float:
        return self.second_moment() / self.mean_weight()

    def __repr__(self) -> str:  # pragma: no cover
        return f"TailLaw({self.kind}, tau={self.tau}, cF={self.cF:.6g})"


def critical_pareto(tau: float) -> TailLaw:
    """The Pareto law with nu = 1: scale (tau-3)/(tau-2)."""
    law = TailLaw.pareto(tau, (tau - 3.0) / (tau - 2.0))
    return law


# ---------------------------------------------------------------------------
# Weight sequences

class WeightSequence:
    """Weights w_1 >= ... >= w_n with cached sums and a size-biased sampler.

    `lam` records the accumulated window parameter relative to the plain
    build: the stored weights equal (1 + lam * n^-eta) * q(j/n).
    """

    def __init__(self, tau: float, weights: np.ndarray, lam: float = 0.0,
                 _alias=None):
        self.tau = tau
        self.exponents = exponents(tau)
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.n = self.weights.shape[0]
        self.lam = lam
        self._ell: Optional[float] = None
        self._sum_w2: Optional[float] = None
        self._sum_w3: Optional[float] = None
        self._alias = _alias  # (prob, alias) — invariant under windowing

    @property
    def ell(self) -> float:
        """sum of weights (compensated)."""
        if self._ell is None:
            self._ell = math.fsum(self.weights)
        return self._ell

    @property
    def sum_w2(self) -> float:
        if self._sum_w2 is None:
            self._sum_w2 = math.fsum(self.weights * self.weights)
        return self._sum_w2

    @property
    def sum_w3(self) -> float:
        if self._sum_w3 is None:
            w = self.weights
            self._sum_w3 = math.fsum(w * w * w)
        return self._sum_w3

    def nu(self) -> float:
        return nu_n(self)

    def weight_of(self, vertex: int) -> float:
        """Weight of 1-based vertex id."""
        if not (1 <= vertex <= self.n):
            raise ValueError(f"vertex {vertex} outside 1..{self.n}")
        return float(self.weights[vertex - 1])

    def alias_tables(self):
        """(prob, alias) arrays for size-biased mark draws P(m) = w_m/ell."""
        if self._alias is None:
            if self.ell <= 0.0:
                raise ValueError("size-biased sampling needs positive total weight")
            self._alias = _kernels.alias_build(self.weights)
        return self._alias

    def windowed(self, lam: float) -> "WeightSequence":
        return apply_window(self, lam)

    def __repr__(self) -> str:  # pragma: no cover
        return (f"WeightSequence(n={self.n}, tau={self.tau}, "
                f"lam={self.lam:+.4g})")


def build_weights(law: TailLaw, n: int) -> WeightSequence:
    """w_j = law.quantile(j/n), j = 1..n (so w_n = 0 by the u=1 convention)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if law.kind == "pareto":
        j = np.arange(1, n + 1, dtype=np.float64)
        w = law.scale * (n / j) ** (1.0 / (law.tau - 1.0))
        w[-1] = 0.0
    else:
        w = np.array([law.quantile(j / n) for j in range(1, n + 1)],
                     dtype=np.float64)
    return WeightSequence(law.tau, w)


def apply_window(ws: WeightSequence, lam: float) -> WeightSequence:
    """Scale all weights by the window factor 1 + lam * n^-eta (> 0)."""
    n = ws.n
    factor = 1.0 + lam * n ** (-ws.exponents.eta)
    if factor <= 0.0:
        raise ValueError(
            f"window factor 1 + lam*n^-eta = {factor:.4g} must be positive")
    prev = 1.0 + ws.lam * n ** (-ws.exponents.eta)
    total = prev * factor
    lam_total = (total - 1.0) * n ** ws.exponents.eta
    return WeightSequence(ws.tau, ws.weights * factor, lam=lam_total,
                          _alias=ws._alias)


def nu_n(ws: WeightSequence) -> float:
    """sum w^2 / sum w; the sequence is critical when this tends to 1."""
    if ws.ell <= 0.0:
        raise ValueError("nu_n needs positive total weight")
    return ws.sum_w2 / ws.ell


# ---------------------------------------------------------------------------
# The zeta constant: n^eta * (nu_n - 1) -> zeta

@dataclass(frozen=True)
class ZetaResult:
    value: float
    error_bound: float
    terms: int
    converged: bool


def _window_series_chunk(i0: int, i1: int, two_alpha: float) -> float:
    """sum_{i=i0}^{i1} [ int_{i-1}^i u^-2a du - i^-2a ], evaluated stably.

    For small i the closed form is fine; past 10^4 the difference of nearby
    powers loses too many bits, so a Taylor expansion of the integral around
    its right endpoint is used (relative error ~ 1e-16 there).
    """
    i = np.arange(i0, i1 + 1, dtype=np.float64)
    ta = two_alpha
    if i1 <= 10_000:
        integ = (i ** (1.0 - ta) - (i - 1.0) ** (1.0 - ta)) / (1.0 - ta)
        g = integ - i ** (-ta)
    else:
        # g(i) = sum_{k>=1} rising(ta, k)/(k+1)! * i^-(ta+k)
        c1 = ta / 2.0
        c2 = ta * (ta + 1.0) / 6.0
        c3 = ta * (ta + 1.0) * (ta + 2.0) / 24.0
        c4 = ta * (ta + 1.0) * (ta + 2.0) * (ta + 3.0) / 120.0
        c5 = ta * (ta + 1.0) * (ta + 2.0) * (ta + 3.0) * (ta + 4.0) / 720.0
        inv = 1.0 / i
        g = i ** (-ta - 1.0) * (c1 + inv * (c2 + inv * (c3 + inv * (c4 + inv * c5))))
    return float(np.sum(g))


def zeta_series(law: TailLaw, tol: float = 1e-8,
                max_terms: Optional[int] = None) -> ZetaResult:
    """zeta = -(cF^2a / E[W]) * sum_{i>=1} [ int_{i-1}^i u^-2a du - i^-2a ].

    Direct summation; the telescoped remainder after N terms lies in
    (0, N^-2a), so summation stops once prefactor * N^-2a <= tol and the
    midpoint of the remainder bracket is added.  Returns the value with a
    rigorous error bound <= tol/2.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    ex = law.exponents
    two_alpha = 2.0 * ex.alpha
    if not (two_alpha < 1.0):
        raise ValueError("series requires tau < 4")
    pref = law.cF ** two_alpha / law.mean_weight()
    n_target = int(math.ceil((pref / tol) ** (1.0 / two_alpha)))
    n_stop = n_target
    converged = True
    if max_terms is not None and max_terms < n_target:
        n_stop = max_terms
        converged = False
    chunk = 10_000_000
    partials = []
    i0 = 1
    while i0 <= n_stop:
        i1 = min(i0 + chunk - 1, n_stop)
        # keep the exact/expanded regimes in separate chunks
        if i0 <= 10_000 < i1:
            i1 = 10_000
        partials.append(_window_series_chunk(i0, i1, two_alpha))
        i0 = i1 + 1
    tail_mid = 0.5 * n_stop ** (-two_alpha)
    total = math.fsum(partials) + tail_mid
    return ZetaResult(
        value=-pref * total,
        error_bound=pref * tail_mid,
        terms=n_stop,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Limit parameters

_ZETA_CACHE: dict = {}


@dataclass(frozen=True)
class LimitParams:
    """Constants of the scaling limit at window parameter lam.

    a = cF^alpha / E[W], b = cF^alpha, theta = lam + zeta, c = theta - a*b,
    d = a*b, beta = -zeta/E[W].  The mass/jump families are c_j = b j^-alpha
    and d_j = c_j/E[W] = a j^-alpha.
    """
    tau: float
    alpha: float
    rho: float
    eta: float
    lam: float
    zeta: float
    mean_w: float
    a: float
    b: float
    theta: float
    c: float
    d: float
    beta: float

    def cj(self, j) -> np.ndarray | float:
        return self.b * np.asarray(j, dtype=np.float64) ** (-self.alpha)

    def dj(self, j) -> np.ndarray | float:
        return self.a * np.asarray(j, dtype=np.float64) ** (-self.alpha)

    def sum_dj3(self) -> float:
        """sum_j d_j^3 = a^3 * zeta_R(3*alpha) (convergent: 3*alpha > 1)."""
        from scipy.special import zeta as zeta_r
        return self.a ** 3 * float(zeta_r(3.0 * self.alpha, 1))

    def report_dict(self) -> dict:
        return {
            "a": self.a, "b": self.b, "c": self.c, "theta": self.theta,
            "zeta": self.zeta, "beta": self.beta, "meanW": self.mean_w,
        }


def limit_params(law: TailLaw, lam: float = 0.0,
                 zeta_tol: float = 1e-6) -> LimitParams:
    """Limit constants for a critical law at window parameter lam."""
    nu = law.nu()
    if abs(nu - 1.0) > 1e-9:
        raise ValueError(f"limit parameters require a critical law (nu={nu})")
    ex = law.exponents
    key = (law.tau, law.cF, zeta_tol)
    zres = _ZETA_CACHE.get(key)
    if zres is None:
        zres = zeta_series(law, tol=zeta_tol)
        _ZETA_CACHE[key] = zres
    mean_w = law.mean_weight()
    b = law.cF ** ex.alpha
    a = b / mean_w
    theta = lam + zres.value
    return LimitParams(
        tau=law.tau, alpha=ex.alpha, rho=ex.rho, eta=ex.eta, lam=lam,
        zeta=zres.value, mean_w=mean_w, a=a, b=b, theta=theta,
        c=theta - a * b, d=a * b, beta=-zres.value / mean_w,
    )
