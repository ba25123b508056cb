"""Critical rank-1 inhomogeneous random graphs and their scaling limits.

The package simulates the rank-1 model with heavy-tailed weights
w_j ~ (n/j)^(1/(tau-1)), tau in (3,4), inside its critical scaling window,
and exposes the limit objects the cluster structure converges to:

- `model`: weight sequences, window shifts, the nu_n criticality measure
  and its series limit, and the (a, b, c, theta) limit constants;
- `graph`: dense and sparse one-shot generators (Norros-Reittu, Chung-Lu,
  generalized random graph), components, ordered rescaled statistics;
- `exploration`: the size-biased mark walk that samples one cluster (or
  all clusters sequentially) without materializing edges;
- `branching`: progeny oracles for the subcritical walk and the pruning
  coupling that bounds the walk/branching gap;
- `levy`: the truncated drift-plus-jumps limit path, first-passage
  sampling, successive excursions, Laplace exponent, density envelope;
- `coalescent`: finite multiplicative coalescent, entrance-boundary
  statistics, excursion-length representation of limit masses;
- `harness`: replicated Monte Carlo experiments with deterministic
  per-replication streams, reports, and CSV samples (CLI: `critgraph`).

Numerical kernels run under numba when available; set CRITGRAPH_NUMBA=0
to force the pure-numpy fallback (identical streams either way).
"""

from ._kernels import jit_active
from ._rng import Stream
from .branching import (BPOutcome, CoupledGap, ProgenyMoments,
                        SubcriticalPrediction, coupled_gap, progeny_moments,
                        simulate_progeny, subcritical_prediction)
from .coalescent import (EntranceStats, ExcursionLengths, MassVector,
                         entrance_conditions, excursion_lengths,
                         matched_excursion_params, sigma_r, simulate_masses)
from .exploration import (ExplorationTrace, HitCheck, RescaledWalk,
                          SequentialResult, containment_indicator,
                          explore_cluster, explore_sequential,
                          multiple_hit_check, rescaled_walk)
from .graph import (ComponentTable, EdgeList, FamilyResult, OrderedStats,
                    coalescent_family, components, edge_probability,
                    generate_dense, generate_sparse, ordered_statistics)
from .harness import (EXPERIMENTS, ExperimentConfig, Report, ks_statistic,
                      run_experiment, summarize)
from .levy import (ClockSet, LevyParams, LevyPath, SuccessiveResult,
                   char_fn, default_horizon, dominating_path, hitting_time,
                   levy_exponent, mean_deficit, sample_clocks,
                   sample_hitting, successive_hitting, thinned_path,
                   truncation_gap)
from .model import (Exponents, LimitParams, TailLaw, WeightSequence,
                    apply_window, build_weights, critical_pareto, exponents,
                    limit_params, nu_n, zeta_series)

__version__ = "0.1.0"

__all__ = [
    "BPOutcome", "ClockSet", "ComponentTable", "CoupledGap", "EdgeList",
    "EntranceStats", "EXPERIMENTS", "ExcursionLengths", "ExperimentConfig",
    "ExplorationTrace", "Exponents", "FamilyResult", "HitCheck",
    "LevyParams", "LevyPath", "LimitParams", "MassVector", "OrderedStats",
    "ProgenyMoments", "Report", "RescaledWalk", "SequentialResult", "Stream",
    "SubcriticalPrediction", "SuccessiveResult", "TailLaw", "WeightSequence",
    "apply_window", "build_weights", "char_fn", "coalescent_family",
    "components", "containment_indicator", "coupled_gap", "critical_pareto",
    "default_horizon", "dominating_path", "edge_probability",
    "entrance_conditions", "excursion_lengths", "explore_cluster",
    "explore_sequential", "generate_dense", "generate_sparse",
    "hitting_time", "jit_active", "ks_statistic", "levy_exponent",
    "limit_params", "matched_excursion_params", "mean_deficit",
    "multiple_hit_check", "nu_n", "ordered_statistics", "progeny_moments",
    "rescaled_walk", "run_experiment", "sample_clocks", "sample_hitting",
    "sigma_r", "simulate_masses", "simulate_progeny",
    "subcritical_prediction", "successive_hitting", "summarize",
    "thinned_path", "truncation_gap", "zeta_series",
]
