"""Timing comparison of the numba kernels against the pure-python fallback.

Run with no arguments to benchmark both backends (each in a subprocess so
the CRITGRAPH_NUMBA import-time switch takes effect) and print a table;
run with --backend-run to time the current process's backend only.

Workload sizes are chosen so the fallback finishes in seconds; the point
is the ratio and that both backends produce identical streams, not peak
throughput.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _workloads():
    from critgraph import (branching, coalescent, exploration, graph, levy,
                           model)
    from critgraph._rng import Stream

    law = model.critical_pareto(3.5)
    ws_large = model.build_weights(law, 300_000)
    ws_small = model.build_weights(law, 10_000)
    ws_sub = model.WeightSequence(
        3.5, ws_small.weights * (0.9 / ws_small.nu()))
    lp = model.limit_params(law)
    lev = levy.LevyParams.from_limit(lp, K=3000)
    cvec, beta = coalescent.matched_excursion_params(lp, 1000)

    def w_uniforms():
        Stream.derive(1, "bench-u").uniforms(1_000_000)

    def w_sparse_gen():
        s = Stream.derive(2, "bench-gen")
        for _ in range(3):
            graph.generate_sparse(ws_large, s)

    def w_components():
        s = Stream.derive(3, "bench-comp")
        edges = graph.generate_sparse(ws_large, s)
        for _ in range(5):
            graph.components(edges, ws_large)

    def w_explore():
        s = Stream.derive(4, "bench-walk")
        for start in range(1, 31):
            exploration.explore_cluster(ws_large, start, s)

    def w_progeny():
        s = Stream.derive(5, "bench-bp")
        for _ in range(3000):
            branching.simulate_progeny(ws_sub, s)

    def w_levy_hit():
        s = Stream.derive(6, "bench-levy")
        levy.sample_hitting(lev, s, 2000)

    def w_excursions():
        s = Stream.derive(7, "bench-exc")
        for _ in range(50):
            coalescent.excursion_lengths(cvec, beta, 100.0, s)

    return [("fill_uniforms 1e6", w_uniforms),
            ("sparse_gen n=3e5 x3", w_sparse_gen),
            ("components n=3e5 x5", w_components),
            ("explore n=3e5 x30", w_explore),
            ("progeny nu=.9 x3000", w_progeny),
            ("levy_hit K=3e3 x2000", w_levy_hit),
            ("excursions J=1e3 x50", w_excursions)]


def run_backend() -> dict:
    from critgraph import _kernels
    from critgraph._rng import Stream

    out = {"jit": _kernels.jit_active(), "times": {},
           "probe": list(Stream.derive(123, "bench-probe").uniforms(5))}
    for name, fn in _workloads():
        fn_t0 = time.perf_counter()
        fn()                                   # warm (and JIT-compile)
        warm = time.perf_counter() - fn_t0
        t0 = time.perf_counter()
        fn()
        out["times"][name] = time.perf_counter() - t0
        out["warm_" + name] = warm
    return out


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--backend-run", action="store_true",
                    help="time the current backend and emit JSON")
    args = ap.parse_args()
    if args.backend_run:
        json.dump(run_backend(), sys.stdout)
        sys.stdout.write("\n")
        return 0

    results = {}
    for flag in ("1", "0"):
        env = dict(os.environ, CRITGRAPH_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--backend-run"],
            env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return 1
        results[flag] = json.loads(proc.stdout)
    assert results["1"]["jit"] and not results["0"]["jit"], \
        "backend switch had no effect"
    assert results["1"]["probe"] == results["0"]["probe"], \
        "backends produced different streams"
    print(f"{'workload':24s} {'numba (s)':>10s} {'numpy (s)':>10s} "
          f"{'speedup':>8s}")
    for name, _ in _workloads():
        tn = results["1"]["times"][name]
        tp = results["0"]["times"][name]
        print(f"{name:24s} {tn:10.4f} {tp:10.4f} {tp / tn:8.1f}x")
    print("\nstreams identical across backends; "
          f"numba compile overhead (first call) up to "
          f"{max(results['1'][k] for k in results['1'] if k.startswith('warm_')):.1f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
