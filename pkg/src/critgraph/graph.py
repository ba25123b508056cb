"""Graph generation, connected components, ordered cluster statistics.

Two exact routes to the same Poissonian random multigraph (loops erased,
multi-edges merged):

* `generate_dense` — pairwise Bernoulli draws with an explicit connection
  kernel; O(n^2), guarded.
* `generate_sparse` — total edge count Poisson(ell/2), endpoints i.i.d.
  size-biased, self-loops dropped, duplicates merged; O(edges).

Component extraction is columnar: one union-find pass labels every vertex by
the smallest vertex of its component, then sizes/weights/surplus come from
bincounts.  `coalescent_family` evolves one graph through a grid of edge
densities using shared pair clocks (the dynamics whose ordered masses form a
multiplicative coalescent).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import math
import numpy as np

from . import _kernels
from ._rng import Stream
from .model import WeightSequence, apply_window

__all__ = [
    "KERNELS", "edge_probability", "EdgeList", "generate_dense",
    "generate_sparse", "ComponentSummary", "ComponentTable", "components",
    "OrderedStats", "ordered_statistics", "FamilyResult", "coalescent_family",
]

# kernel name -> code used by the pairwise generator
KERNELS = {"norros_reittu": 0, "chung_lu": 1, "grg": 2}
_KERNEL_ALIASES = {"nr": "norros_reittu", "cl": "chung_lu", "grg": "grg"}


def _kernel_code(kernel: str) -> int:
    name = _KERNEL_ALIASES.get(kernel, kernel)
    if name not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; use one of {sorted(KERNELS)}")
    return KERNELS[name]


def edge_probability(wi: float, wj: float, ell: float, kernel: str = "norros_reittu") -> float:
    """Connection probability of a single pair under the named kernel."""
    code = _kernel_code(kernel)
    x = wi * wj / ell
    if code == 0:
        return -math.expm1(-x)
    if code == 1:
        return min(x, 1.0)
    return x / (1.0 + x)


@dataclass
class EdgeList:
    """Simple edges of one realization (1-based endpoints, src < dst)."""
    n: int
    src: np.ndarray
    dst: np.ndarray
    kernel: str
    n_draws: int = 0        # raw endpoint-pair draws (sparse route)
    n_selfloops: int = 0    # draws discarded as loops
    n_multi: int = 0        # draws merged into an existing pair

    @property
    def edge_count(self) -> int:
        return int(self.src.shape[0])


def generate_dense(ws: WeightSequence, stream: Stream,
                   kernel: str = "norros_reittu",
                   guard: int = 100_000) -> EdgeList:
    """Pairwise Bernoulli graph; refuses n > guard (O(n^2) work)."""
    code = _kernel_code(kernel)
    n = ws.n
    if n > guard:
        raise ValueError(
            f"dense generation is O(n^2); n={n} exceeds guard={guard}")
    if ws.ell <= 0.0:
        return EdgeList(n, np.empty(0, np.int64), np.empty(0, np.int64),
                        _KERNEL_ALIASES.get(kernel, kernel))
    w = ws.weights
    ell = ws.ell
    if n <= 2000:
        cap = n * (n - 1) // 2
        out_i = np.empty(cap, dtype=np.int64)
        out_j = np.empty(cap, dtype=np.int64)
        cnt = _kernels.dense_pairs(stream.state, w, ell, code, out_i, out_j)
        src, dst = out_i[:cnt].copy(), out_j[:cnt].copy()
    else:
        # row-chunked to keep memory linear
        chunks_i, chunks_j = [], []
        for i in range(n - 1):
            x = w[i] * w[i + 1:] / ell
            if code == 0:
                p = -np.expm1(-x)
            elif code == 1:
                p = np.minimum(x, 1.0)
            else:
                p = x / (1.0 + x)
            u = stream.uniforms(n - 1 - i)
            hit = np.nonzero(u < p)[0]
            if hit.shape[0]:
                chunks_i.append(np.full(hit.shape[0], i + 1, dtype=np.int64))
                chunks_j.append(hit.astype(np.int64) + i + 2)
        if chunks_i:
            src = np.concatenate(chunks_i)
            dst = np.concatenate(chunks_j)
        else:
            src = np.empty(0, np.int64)
            dst = np.empty(0, np.int64)
    return EdgeList(n, src, dst, _KERNEL_ALIASES.get(kernel, kernel))


def generate_sparse(ws: WeightSequence, stream: Stream) -> EdgeList:
    """Size-biased endpoint construction of the Poissonian graph.

    Draws Poisson(ell/2) endpoint pairs i.i.d. P(m) = w_m/ell, discards
    self-loops and merges duplicates — an exact realization of the same
    simple-graph law as the dense route with the exponential kernel.
    """
    n = ws.n
    if ws.ell <= 0.0:
        return EdgeList(n, np.empty(0, np.int64), np.empty(0, np.int64),
                        "norros_reittu")
    m = stream.poisson(ws.ell / 2.0)
    if m == 0:
        return EdgeList(n, np.empty(0, np.int64), np.empty(0, np.int64),
                        "norros_reittu", n_draws=0)
    prob, alias = ws.alias_tables()
    out_i = np.empty(m, dtype=np.int64)
    out_j = np.empty(m, dtype=np.int64)
    kept = _kernels.sparse_pairs(stream.state, prob, alias, m, out_i, out_j)
    key = out_i[:kept] * np.int64(n + 1) + out_j[:kept]
    uniq = np.unique(key)
    src = (uniq // (n + 1)).astype(np.int64)
    dst = (uniq % (n + 1)).astype(np.int64)
    return EdgeList(n, src, dst, "norros_reittu", n_draws=m,
                    n_selfloops=m - kept, n_multi=kept - uniq.shape[0])


# ---------------------------------------------------------------------------
# Components

@dataclass(frozen=True)
class ComponentSummary:
    size: int
    weight: float
    surplus: int
    min_vertex: int


@dataclass
class ComponentTable:
    """Columnar per-component data, ordered by min_vertex ascending."""
    n: int
    sizes: np.ndarray       # int64
    weights: np.ndarray     # float64 (windowed weights as passed in)
    surplus: np.ndarray     # int64
    min_vertex: np.ndarray  # int64, equals the union-find labels
    labels: np.ndarray      # int64[n+1], labels[v] = min vertex of v's comp

    @property
    def count(self) -> int:
        return int(self.sizes.shape[0])

    def summary(self, idx: int) -> ComponentSummary:
        return ComponentSummary(
            size=int(self.sizes[idx]), weight=float(self.weights[idx]),
            surplus=int(self.surplus[idx]), min_vertex=int(self.min_vertex[idx]))

    def index_of_vertex(self, vertex: int) -> int:
        if not (1 <= vertex <= self.n):
            raise ValueError(f"vertex {vertex} outside 1..{self.n}")
        return int(np.searchsorted(self.min_vertex, self.labels[vertex]))

    def members(self, idx: int) -> np.ndarray:
        return np.nonzero(self.labels[1:] == self.min_vertex[idx])[0] + 1

    def size_order(self) -> np.ndarray:
        """Component indices by descending size, ties by min_vertex."""
        return np.lexsort((self.min_vertex, -self.sizes))

    def weight_order(self) -> np.ndarray:
        return np.lexsort((self.min_vertex, -self.weights))


def components(edges: EdgeList, ws: WeightSequence) -> ComponentTable:
    """Union-find over the edge list; surplus = edges - (size - 1)."""
    if ws.n != edges.n:
        raise ValueError("weight sequence and edge list disagree on n")
    n = edges.n
    labels = _kernels.uf_components(n, edges.src, edges.dst)
    uniq, inv = np.unique(labels[1:], return_inverse=True)
    sizes = np.bincount(inv, minlength=uniq.shape[0]).astype(np.int64)
    weights = np.bincount(inv, weights=ws.weights, minlength=uniq.shape[0])
    if edges.edge_count:
        e_inv = inv[edges.src - 1]
        edge_counts = np.bincount(e_inv, minlength=uniq.shape[0]).astype(np.int64)
    else:
        edge_counts = np.zeros(uniq.shape[0], dtype=np.int64)
    surplus = edge_counts - (sizes - 1)
    return ComponentTable(n=n, sizes=sizes, weights=weights, surplus=surplus,
                          min_vertex=uniq.astype(np.int64), labels=labels)


@dataclass(frozen=True)
class OrderedStats:
    """Rescaled ordered cluster statistics: x n^-rho, descending."""
    sizes: np.ndarray
    weights: np.ndarray
    size_min_vertex: np.ndarray
    weight_min_vertex: np.ndarray
    scale: float
    n: int


def ordered_statistics(table: ComponentTable, ws: WeightSequence) -> OrderedStats:
    scale = float(table.n) ** (-ws.exponents.rho)
    so = table.size_order()
    wo = table.weight_order()
    return OrderedStats(
        sizes=table.sizes[so] * scale,
        weights=table.weights[wo] * scale,
        size_min_vertex=table.min_vertex[so],
        weight_min_vertex=table.min_vertex[wo],
        scale=scale,
        n=table.n,
    )


# ---------------------------------------------------------------------------
# Graph-valued coalescent dynamics

@dataclass
class FamilyResult:
    times: np.ndarray
    tables: list
    masses: list          # ordered n^-rho weights per time
    sequences: list       # the windowed WeightSequence per time
    coupled: bool         # True: shared pair clocks across the grid


def coalescent_family(ws: WeightSequence, lambda_n: float,
                      t_grid: Sequence[float], stream: Stream,
                      pairwise_guard: int = 3000) -> FamilyResult:
    """Graphs along t with edge {i,j} present iff its exponential pair clock
    xi_ij (rate w_i w_j/ell) is below 1 + (lambda_n + t) * ell * n^-2rho.

    Weights scale by the same factor, which is exactly a critical window with
    lam_eff = (lambda_n + t) * ell/n, so each marginal is again the standard
    model.  Below `pairwise_guard` all pair clocks are realized once and the
    family is coupled across t; above it each time point is regenerated
    independently (flagged via coupled=False).
    """
    n = ws.n
    ex = ws.exponents
    t_grid = np.asarray(sorted(t_grid), dtype=np.float64)
    ell = ws.ell
    factors = 1.0 + (lambda_n + t_grid) * ell * float(n) ** (-2.0 * ex.rho)
    if np.any(factors <= 0.0):
        raise ValueError("edge-density factor must stay positive on the grid")
    tables, masses, seqs = [], [], []
    if n <= pairwise_guard:
        iu, ju = np.triu_indices(n, 1)
        rates = ws.weights[iu] * ws.weights[ju] / ell
        ok = rates > 0.0
        iu, ju, rates = iu[ok], ju[ok], rates[ok]
        clocks = stream.exponentials(rates)
        for k, t in enumerate(t_grid):
            sel = clocks <= factors[k]
            edges = EdgeList(n, (iu[sel] + 1).astype(np.int64),
                             (ju[sel] + 1).astype(np.int64), "norros_reittu")
            lam_eff = (lambda_n + t) * ell / n
            ws_t = apply_window(ws, lam_eff)
            tab = components(edges, ws_t)
            tables.append(tab)
            seqs.append(ws_t)
            masses.append(ordered_statistics(tab, ws_t).weights)
        coupled = True
    else:
        for k, t in enumerate(t_grid):
            lam_eff = (lambda_n + t) * ell / n
            ws_t = apply_window(ws, lam_eff)
            edges = generate_sparse(ws_t, stream.substream(k))
            tab = components(edges, ws_t)
            tables.append(tab)
            seqs.append(ws_t)
            masses.append(ordered_statistics(tab, ws_t).weights)
        coupled = False
    return FamilyResult(times=t_grid, tables=tables, masses=masses,
                        sequences=seqs, coupled=coupled)
