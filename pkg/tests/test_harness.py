"""Experiment configs, statistics helpers, report plumbing, determinism."""

import json
import math

import numpy as np
import pytest

from critgraph.harness import (
    ConfigError, ExperimentConfig, _mc_check, ks_statistic, ks_threshold,
    run_experiment, summarize, wilson_interval,
)


# ---------------------------------------------------------------------------
# Statistics helpers

def test_ks_hand_value():
    d, p = ks_statistic([1.0, 2.0, 3.0], [1.5, 2.5])
    assert d == pytest.approx(1.0 / 3.0, rel=1e-12)
    d0, p0 = ks_statistic([1.0, 2.0], [1.0, 2.0])
    assert d0 == 0.0 and p0 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ks_statistic([], [1.0])


def test_ks_uniform_null():
    rng = np.random.default_rng(7)
    d, p = ks_statistic(rng.random(4000), rng.random(4000))
    assert p > 1e-3
    assert d < ks_threshold(4000, 4000)
    # and a clear alternative is detected
    d2, p2 = ks_statistic(rng.random(4000), 0.5 * rng.random(4000))
    assert p2 < 1e-6 and d2 > ks_threshold(4000, 4000)


def test_ks_threshold_formula():
    c = math.sqrt(-0.5 * math.log(0.025))
    assert ks_threshold(100, 100, 0.05) == pytest.approx(
        c * math.sqrt(200.0 / 10_000.0), rel=1e-12)
    # default significance is 1e-3
    assert ks_threshold(500, 500) == pytest.approx(
        math.sqrt(-0.5 * math.log(5e-4)) * math.sqrt(1000.0 / 250_000.0),
        rel=1e-12)


def test_wilson_interval_reference():
    lo, hi = wilson_interval(50, 100, z=1.96)
    assert lo == pytest.approx(0.4038, abs=2e-4)
    assert hi == pytest.approx(0.5962, abs=2e-4)
    lo0, hi0 = wilson_interval(0, 20, z=2.0)
    assert lo0 == 0.0 and hi0 > 0.0
    lo1, hi1 = wilson_interval(20, 20, z=2.0)
    assert hi1 == 1.0 and lo1 < 1.0
    with pytest.raises(ValueError):
        wilson_interval(1, 0)
    with pytest.raises(ValueError):
        wilson_interval(5, 4)


def test_summarize_constant_and_pair():
    s = summarize([2.5] * 10)
    assert s.mean == 2.5 and s.se == 0.0 and s.count == 10
    s2 = summarize([0.0, 1.0])
    assert s2.mean == 0.5
    assert s2.se == pytest.approx(0.5)   # jackknife equals classical for means
    with pytest.raises(ValueError):
        summarize([])


def test_summarize_gaussian_sample():
    rng = np.random.default_rng(11)
    x = rng.standard_normal(1_000_000)
    s = summarize(x)
    assert abs(s.mean) < 4.0 * s.se
    assert s.se == pytest.approx(1e-3, rel=0.05)
    assert s.deciles.shape == (9,)
    assert s.deciles[4] == pytest.approx(0.0, abs=5e-3)
    assert s.count == x.size


def test_mc_check_zero_se_cases():
    row, ok = _mc_check("q", [3.0, 3.0, 3.0], 3.0)
    assert ok and row["z"] == 0.0
    row2, ok2 = _mc_check("q", [3.0, 3.0, 3.0], 2.0)
    assert not ok2 and math.isinf(row2["z"])


# ---------------------------------------------------------------------------
# Config validation

def test_config_defaults_fill_in():
    cfg = ExperimentConfig(experiment="zeta_convergence", seed=1)
    assert cfg.n == (10**3, 10**4, 10**5, 10**6, 10**7)
    assert cfg.replications == 0
    assert cfg.window(1000) == 0.0
    cfg2 = ExperimentConfig(experiment="subcritical", seed=1)
    assert cfg2.window(10_000) == pytest.approx(-(10_000.0 ** 0.1))
    cfg3 = ExperimentConfig(experiment="subcritical", seed=1, lam=-2.5)
    assert cfg3.window(10_000) == -2.5
    assert cfg.tol("anything", 42) == 42
    cfg4 = ExperimentConfig(experiment="moments", seed=1,
                            tolerances={"anything": 7})
    assert cfg4.tol("anything", 42) == 7


@pytest.mark.parametrize("kw", [
    dict(experiment="nope"),
    dict(seed=None),
    dict(seed=2 ** 64),
    dict(seed=-1),
    dict(tau=3.0),
    dict(tau=4.2),
    dict(law="lognormal"),
    dict(n=(1,)),
    dict(replications=-1),
    dict(K=0),
    dict(workers=-2),
    dict(tolerances=[1, 2]),
])
def test_config_rejections(kw):
    base = dict(experiment="moments", seed=5)
    base.update(kw)
    with pytest.raises(ConfigError):
        ExperimentConfig(**base)


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(experiment="moments", seed=9, n=(500,),
                           replications=10, K=64, workers=1,
                           tolerances={"nu_targets": [0.5]})
    d = cfg.to_dict()
    cfg2 = ExperimentConfig.from_dict(d)
    assert cfg2.to_dict() == d
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(d), encoding="utf-8")
    cfg3 = ExperimentConfig.from_file(str(path))
    assert cfg3.to_dict() == d


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"experiment": "moments", "seed": 1,
                                    "bogus": True})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"experiment": "moments"})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(str(bad))
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(str(arr))


# ---------------------------------------------------------------------------
# Running experiments

def _small_moments_cfg(**kw):
    base = dict(experiment="moments", seed=77, n=(2000,), replications=400,
                workers=1, tolerances={"nu_targets": (0.5, 0.8)})
    base.update(kw)
    return ExperimentConfig(**base)


def test_zeta_experiment_passes():
    cfg = ExperimentConfig(experiment="zeta_convergence", seed=3,
                           n=(10**3, 10**4, 10**5))
    rep = run_experiment(cfg)
    assert rep.passed is True
    names = [c["name"] for c in rep.checks]
    assert names == ["zeta_drift_monotone", "zeta_final_rel"]
    assert rep.limit["zeta"] == pytest.approx(-0.8875076831791101, abs=1e-7)


def test_moments_experiment_runs_and_passes():
    rep = run_experiment(_small_moments_cfg())
    assert rep.passed is True
    assert rep.flagged["error_count"] == 0
    assert len(rep.checks) == 12            # 6 quantities x 2 targets
    assert rep.experiment == "moments"


def test_zero_replications_keeps_schema():
    rep = run_experiment(_small_moments_cfg(replications=0))
    assert rep.passed is None
    assert all(c["passed"] is None for c in rep.checks)
    assert len(rep.checks) == 12


def test_determinism_and_worker_independence():
    r1 = run_experiment(_small_moments_cfg())
    r2 = run_experiment(_small_moments_cfg())
    d1, d2 = r1.to_dict(), r2.to_dict()
    for d in (d1, d2):
        d.pop("runtime_s")
    assert d1 == d2
    r3 = run_experiment(_small_moments_cfg(workers=2))
    d3 = r3.to_dict()
    d3.pop("runtime_s")
    d3["config"].pop("workers"), d1["config"].pop("workers")
    assert d3 == d1


def test_report_write_layout(tmp_path):
    out = tmp_path / "rep"
    cfg = ExperimentConfig(experiment="zeta_convergence", seed=3,
                           n=(10**3, 10**4), out=str(out))
    run_experiment(cfg)
    rep_path = out / "report.json"
    csv_path = out / "samples_zeta.csv"
    assert rep_path.is_file() and csv_path.is_file()
    doc = json.loads(rep_path.read_text(encoding="utf-8"))
    assert doc["experiment"] == "zeta_convergence"
    assert doc["config"]["seed"] == 3
    raw = csv_path.read_bytes()
    assert b"\r" not in raw                 # LF endings
    lines = raw.decode("utf-8").strip().split("\n")
    assert lines[0] == "n,nu_n,drift,abs_diff"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "1000"
    assert "." in first[2] and "," not in first[2].replace(",", "")
    float(first[2])                         # parses as a '.'-decimal float


def test_report_write_is_reproducible(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        run_experiment(_small_moments_cfg(out=str(out)))
        outs.append(out)
    c1 = (outs[0] / "samples_moments.csv").read_bytes()
    c2 = (outs[1] / "samples_moments.csv").read_bytes()
    assert c1 == c2
    j1 = json.loads((outs[0] / "report.json").read_text())
    j2 = json.loads((outs[1] / "report.json").read_text())
    j1.pop("runtime_s"), j2.pop("runtime_s")
    j1["config"].pop("out"), j2["config"].pop("out")
    assert j1 == j2
