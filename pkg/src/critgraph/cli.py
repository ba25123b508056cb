"""Command-line front end.

Subcommands: `gen` (one graph realization), `explore` (one cluster walk),
`levy` (first-passage sampling / one path dump), `coalesce` (mass-vector
evolution, entrance statistics, excursion lengths), `bp` (progeny moments,
closed form vs Monte Carlo), and `experiment` (the replicated harness).

Every subcommand prints a JSON document to stdout; file outputs are CSV
(comma separated, header row, '.' decimal, LF line endings).  Exit codes:
0 on success with all declared checks passing, 2 when a declared check
fails, 1 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Optional

import numpy as np

from . import branching, coalescent, exploration, graph, harness, levy
from ._rng import Stream
from .harness import ConfigError, ExperimentConfig, _jsonable, run_experiment
from .model import (LimitParams, WeightSequence, apply_window, build_weights,
                    critical_pareto, limit_params)


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _emit(doc: dict) -> None:
    json.dump(_jsonable(doc), sys.stdout, indent=2, allow_nan=True)
    sys.stdout.write("\n")


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([harness._cell(v) for v in row])


def _weights(args) -> WeightSequence:
    ws = build_weights(critical_pareto(args.tau), args.n)
    if args.lam:
        ws = apply_window(ws, args.lam)
    return ws


def _limit(tau: float, lam: float = 0.0) -> LimitParams:
    return limit_params(critical_pareto(tau), lam=lam)


def _add_model_args(p, n_default=None):
    p.add_argument("--tau", type=float, default=3.5,
                   help="tail exponent in (3,4) (default 3.5)")
    p.add_argument("--n", type=int, default=n_default,
                   required=n_default is None, help="number of vertices")
    p.add_argument("--lam", type=float, default=0.0,
                   help="scaling-window parameter (default 0)")
    p.add_argument("--seed", type=int, required=True, help="master seed (u64)")


# ---------------------------------------------------------------------------
# gen

def _cmd_gen(args) -> int:
    ws = _weights(args)
    stream = Stream.derive(args.seed, "cli-gen", 0)
    if args.route == "sparse":
        edges = graph.generate_sparse(ws, stream)
    else:
        edges = graph.generate_dense(ws, stream, kernel=args.kernel)
    table = graph.components(edges, ws)
    stats = graph.ordered_statistics(table, ws)
    order = table.size_order()
    top = []
    for idx in order[:args.top]:
        s = table.summary(int(idx))
        top.append({"size": s.size, "weight": s.weight,
                    "surplus": s.surplus, "min_vertex": s.min_vertex})
    if args.components_out:
        rows = [(rank + 1, int(table.sizes[idx]), float(table.weights[idx]),
                 int(table.surplus[idx]), int(table.min_vertex[idx]),
                 float(table.sizes[idx]) * stats.scale)
                for rank, idx in enumerate(order)]
        _write_csv(args.components_out,
                   ("rank", "size", "weight", "surplus", "min_vertex",
                    "rescaled_size"), rows)
    _emit({
        "n": ws.n, "tau": args.tau, "lam": args.lam, "route": args.route,
        "kernel": edges.kernel, "edges": edges.edge_count,
        "pair_draws": edges.n_draws, "self_loops": edges.n_selfloops,
        "multi_merged": edges.n_multi, "components": table.count,
        "top_components": top,
        "rescaled_top_sizes": stats.sizes[:args.top],
        "rescaled_top_weights": stats.weights[:args.top],
        "components_out": args.components_out,
    })
    return 0


# ---------------------------------------------------------------------------
# explore

def _cmd_explore(args) -> int:
    ws = _weights(args)
    stream = Stream.derive(args.seed, "cli-explore", 0)
    forbidden = None
    if args.forbidden:
        forbidden = [int(tok) for tok in args.forbidden.split(",") if tok]
    record = bool(args.walk_out)
    trace = exploration.explore_cluster(ws, args.start, stream,
                                        forbidden=forbidden, record=record)
    hits = exploration.multiple_hit_check(trace, ws)
    doc = {
        "n": ws.n, "tau": args.tau, "lam": args.lam, "start": args.start,
        "size": trace.size, "weight": trace.weight, "steps": trace.steps,
        "thinned": trace.thinned, "capped": trace.capped,
        "scale": trace.scale, "s_final": trace.s_final,
        "rescaled_size": trace.size * float(ws.n) ** (-ws.exponents.rho),
        "multiple_hits": {"observed": hits.observed, "mean_bound": hits.bound},
        "walk_out": args.walk_out,
    }
    if record:
        walk = exploration.rescaled_walk(trace, ws)
        marks = np.concatenate(([0], trace.marks))
        kept = np.concatenate(([1], trace.kept))
        rows = zip(range(trace.z.shape[0]), walk.times, trace.z,
                   walk.values, marks, kept)
        _write_csv(args.walk_out,
                   ("step", "t_rescaled", "z", "z_rescaled", "mark", "kept"),
                   rows)
    _emit(doc)
    return 0


# ---------------------------------------------------------------------------
# levy

def _cmd_levy(args) -> int:
    lp = _limit(args.tau, args.lam)
    params = levy.LevyParams.from_limit(lp, K=args.K)
    doc = {
        "tau": args.tau, "lam": args.lam, "K": args.K,
        "convention": args.convention,
        "a": params.a, "b": params.b, "c": params.c,
        "drift_slope": params.drift_slope(),
        "default_horizon": levy.default_horizon(params),
    }
    if args.psi is not None:
        doc["laplace_exponent"] = [
            {"vartheta": th, "value": levy.levy_exponent(params, th).value,
             "error_bound": levy.levy_exponent(params, th).error_bound}
            for th in args.psi]
    stream = Stream.derive(args.seed, "cli-levy", 0)
    if args.path_out:
        clocks = levy.sample_clocks(params, stream,
                                    convention=args.convention)
        horizon = args.horizon or levy.default_horizon(params)
        path = levy.thinned_path(params, clocks, horizon,
                                 convention=args.convention)
        _write_csv(args.path_out, ("t_event", "value_before", "value_after"),
                   path.events_table())
        doc["path"] = {"v0": path.v0, "slope": path.slope,
                       "horizon": path.horizon, "events": path.n_events,
                       "hitting_time": levy.hitting_time(path),
                       "file": args.path_out}
    if args.samples > 0:
        if args.successive > 0:
            times = np.empty((args.samples, args.successive))
            for r in range(args.samples):
                out = levy.successive_hitting(
                    params, stream, n_excursions=args.successive,
                    convention=args.convention, horizon=args.horizon)
                times[r] = np.pad(out.times, (0, args.successive
                                              - out.times.shape[0]),
                                  constant_values=np.nan)
            doc["successive"] = {
                "n_excursions": args.successive,
                "mean_times": np.nanmean(times, axis=0),
                "incomplete": int(np.isnan(times[:, -1]).sum()),
            }
            if args.samples_out:
                _write_csv(args.samples_out,
                           tuple(f"h{k + 1}" for k in range(args.successive)),
                           times)
        else:
            out = levy.sample_hitting(params, stream, args.samples,
                                      convention=args.convention,
                                      horizon=args.horizon)
            summ = harness.summarize(out.times) if out.times.size else None
            doc["hitting"] = {
                "samples": int(out.times.size), "misses": out.misses,
                "mean": None if summ is None else summ.mean,
                "se": None if summ is None else summ.se,
                "deciles": None if summ is None else summ.deciles,
            }
            if args.samples_out:
                _write_csv(args.samples_out, ("h",),
                           ((v,) for v in out.times))
    _emit(doc)
    return 0


# ---------------------------------------------------------------------------
# coalesce

def _read_masses(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty mass file")
    start = 1 if not _is_float(rows[0][0]) else 0
    try:
        return np.asarray([float(r[0]) for r in rows[start:] if r],
                          dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _is_float(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _cmd_coalesce(args) -> int:
    stream = Stream.derive(args.seed, "cli-coalesce", 0)
    if args.excursions > 0:
        lp = _limit(args.tau, args.lam)
        cvec, beta = coalescent.matched_excursion_params(lp, args.excursions)
        horizon = args.horizon if args.horizon else 200.0
        tops = np.empty(args.samples)
        counts = np.empty(args.samples, dtype=np.int64)
        dropped = 0
        for r in range(args.samples):
            res = coalescent.excursion_lengths(cvec, beta, horizon, stream)
            tops[r] = res.lengths[0] if res.lengths.size else np.nan
            counts[r] = res.lengths.size
            dropped += int(res.open_dropped)
        if args.samples_out:
            _write_csv(args.samples_out, ("top_length",),
                       ((v,) for v in tops))
        _emit({
            "mode": "excursions", "J": args.excursions, "beta": beta,
            "slope": beta - float(cvec @ cvec), "horizon": horizon,
            "samples": args.samples,
            "top_length_mean": float(np.nanmean(tops)),
            "mean_count": float(counts.mean()),
            "open_excursions_dropped": dropped,
            "samples_out": args.samples_out,
        })
        return 0
    if not args.masses:
        raise ConfigError("coalesce needs --masses FILE or --excursions J")
    x0 = coalescent.MassVector(_read_masses(args.masses))
    doc = {"mode": "masses", "count": len(x0), "total": x0.total,
           "sigma2": x0.sigma2, "sigma3": x0.sigma3}
    xt = x0
    if args.t > 0.0:
        xt = coalescent.simulate_masses(x0, args.t, stream)
        doc["evolved"] = {"t": args.t, "count": len(xt), "total": xt.total,
                          "sigma2": xt.sigma2, "sigma3": xt.sigma3,
                          "top": xt.masses[:10]}
    if args.lam_n is not None:
        lp = _limit(args.tau, args.lam)
        st = coalescent.entrance_conditions(xt, args.lam_n, lp)
        doc["entrance"] = {
            "lambda_n": st.lam,
            "cond_a": st.cond_a, "target_a": st.target_a,
            "cond_b": st.cond_b, "target_b": st.target_b,
            "cond_c": st.cond_c, "target_c": st.target_c,
        }
    if args.samples_out:
        _write_csv(args.samples_out, ("mass",), ((v,) for v in xt.masses))
        doc["samples_out"] = args.samples_out
    _emit(doc)
    return 0


# ---------------------------------------------------------------------------
# bp

def _cmd_bp(args) -> int:
    ws = _weights(args)
    if args.scale_nu is not None:
        base = ws.nu()
        if base <= 0.0:
            raise ConfigError("cannot rescale a zero-weight sequence")
        ws = WeightSequence(ws.tau, ws.weights * (args.scale_nu / base),
                            lam=ws.lam)
    mom = branching.progeny_moments(ws, args.root)
    stream = Stream.derive(args.seed, "cli-bp", 0)
    tot = np.empty(args.reps)
    wt = np.empty(args.reps)
    capped = 0
    for r in range(args.reps):
        out = branching.simulate_progeny(ws, stream, root=args.root)
        if out.capped:
            capped += 1
            tot[r] = wt[r] = np.nan
        else:
            tot[r], wt[r] = out.total, out.weight
    ok = ~np.isnan(tot)
    mc = {}
    if ok.any():
        pairs = (("T", tot[ok]), ("T^2", tot[ok] ** 2),
                 ("wT", wt[ok]), ("wT^2", wt[ok] ** 2))
        names = dict(pairs)
        targets = {"T": mom.et, "T^2": mom.et2, "wT": mom.ewt,
                   "wT^2": mom.ewt2}
        if args.root is not None:
            targets = {"T": mom.eti, "T^2": mom.eti2, "wT": mom.ewti,
                       "wT^2": mom.ewti2}
        for name, vals in names.items():
            s = harness.summarize(vals)
            z = ((s.mean - targets[name]) / s.se if s.se > 0
                 else math.copysign(math.inf, s.mean - targets[name]))
            mc[name] = {"mc_mean": s.mean, "se": s.se,
                        "analytic": targets[name], "z": z}
    _emit({
        "n": ws.n, "tau": args.tau, "nu": ws.nu(), "root": args.root,
        "replications": args.reps, "capped": capped,
        "closed_form": dict(mom.rows()),
        "monte_carlo": mc,
    })
    return 0


# ---------------------------------------------------------------------------
# experiment

def _parse_tols(pairs) -> dict:
    out = {}
    for tok in pairs or ():
        if "=" not in tok:
            raise ConfigError(f"--tol expects KEY=VALUE, got {tok!r}")
        key, _, val = tok.partition("=")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            raise ConfigError(f"--tol {key}: {val!r} is not valid JSON")
    return out


def _cmd_experiment(args) -> int:
    base: dict = {}
    if args.config:
        cfg0 = ExperimentConfig.from_file(args.config)
        base = cfg0.to_dict()
    if base.get("experiment", args.name) != args.name:
        raise ConfigError(
            f"config file is for {base['experiment']!r}, not {args.name!r}")
    base["experiment"] = args.name
    if args.seed is not None:
        base["seed"] = args.seed
    if "seed" not in base:
        raise ConfigError("a seed is required (--seed or config file)")
    for key in ("tau", "lam", "replications", "K", "workers", "out"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    if args.n:
        base["n"] = tuple(args.n)
    tols = _parse_tols(args.tol)
    if tols:
        base["tolerances"] = {**base.get("tolerances", {}), **tols}
    cfg = ExperimentConfig.from_dict(base)
    report = run_experiment(cfg)
    for chk in report.checks:
        status = ("PASS" if chk["passed"] else
                  "FAIL" if chk["passed"] is not None else "----")
        print(f"[{status}] {chk['name']}: value={chk['value']} "
              f"target={chk['target']} tol={chk['tolerance']}",
              file=sys.stderr)
    _emit(report.to_dict())
    return 2 if report.passed is False else 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="critgraph",
                  description="Critical rank-1 random graphs and their "
                              "scaling-limit objects.")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[], help="generate one graph",
                       description="Generate one realization and report its "
                                   "component structure.")
    _add_model_args(p)
    p.add_argument("--route", choices=("sparse", "dense"), default="sparse")
    p.add_argument("--kernel", default="norros_reittu",
                   choices=("norros_reittu", "chung_lu", "grg"),
                   help="dense-route edge kernel")
    p.add_argument("--top", type=int, default=10,
                   help="components to list (default 10)")
    p.add_argument("--components-out", metavar="FILE",
                   help="write the full component table as CSV")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("explore", help="explore one cluster",
                       description="Run the thinned mark walk from one "
                                   "vertex and report the cluster.")
    _add_model_args(p)
    p.add_argument("--start", type=int, default=1, help="root vertex (1-based)")
    p.add_argument("--forbidden", metavar="IDS",
                   help="comma-separated vertex ids removed from the mark law")
    p.add_argument("--walk-out", metavar="FILE",
                   help="record the walk and write it as CSV")
    p.set_defaults(fn=_cmd_explore)

    p = sub.add_parser("levy", help="first-passage sampling",
                       description="Sample first-passage times of the "
                                   "truncated drift-plus-jumps limit path.")
    p.add_argument("--tau", type=float, default=3.5)
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--K", type=int, default=10_000, help="jump truncation")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--successive", type=int, default=0, metavar="M",
                   help="sample M successive excursions instead of H(0)")
    p.add_argument("--convention", choices=levy.CONVENTIONS,
                   default="size_rate")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--psi", type=float, nargs="*", default=None,
                   metavar="THETA", help="evaluate the Laplace exponent")
    p.add_argument("--samples-out", metavar="FILE")
    p.add_argument("--path-out", metavar="FILE",
                   help="write one path's event table as CSV")
    p.set_defaults(fn=_cmd_levy)

    p = sub.add_parser("coalesce", help="multiplicative coalescent",
                       description="Evolve a finite mass vector, check "
                                   "entrance-boundary statistics, or sample "
                                   "matched excursion lengths.")
    p.add_argument("--tau", type=float, default=3.5)
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--masses", metavar="FILE",
                   help="CSV of masses (first column)")
    p.add_argument("--t", type=float, default=0.0, help="evolution time")
    p.add_argument("--lam-n", type=float, default=None,
                   help="window parameter for entrance statistics")
    p.add_argument("--excursions", type=int, default=0, metavar="J",
                   help="sample excursion lengths with J matched jump terms")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--horizon", type=float, default=0.0)
    p.add_argument("--samples-out", metavar="FILE")
    p.set_defaults(fn=_cmd_coalesce)

    p = sub.add_parser("bp", help="branching-process moments",
                       description="Compare progeny-moment closed forms "
                                   "with Monte Carlo on one weight sequence.")
    _add_model_args(p)
    p.add_argument("--root", type=int, default=None,
                   help="fixed root vertex (default: size-biased root)")
    p.add_argument("--scale-nu", type=float, default=None,
                   help="rescale weights so nu_n equals this (must be < 1)")
    p.add_argument("--reps", type=int, default=10_000)
    p.set_defaults(fn=_cmd_bp)

    p = sub.add_parser("experiment", help="run a replicated experiment",
                       description="Run one named experiment of the "
                                   "replication harness and write "
                                   "report.json + samples_*.csv.")
    p.add_argument("name", choices=harness.EXPERIMENTS)
    p.add_argument("--config", metavar="FILE", help="JSON config document")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", metavar="DIR", default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--n", type=int, nargs="*", default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--tol", action="append", metavar="KEY=VALUE",
                   help="override one tolerance knob (JSON value)")
    p.set_defaults(fn=_cmd_experiment)
    return top


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except (ConfigError, ValueError, OSError) as exc:
        print(f"critgraph: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":              # pragma: no cover
    raise SystemExit(main())
