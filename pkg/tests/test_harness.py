"""Monte Carlo experiment drivers: statistics, determinism, reports."""

import json
import math

import numpy as np
import pytest

from freeconv import edge as eg
from freeconv import harness as hz
from freeconv import measure as ms
from freeconv import rmt
from freeconv import tracywidom as tw


def gue_control_spec(n, seed, t=1.0):
    zeros = np.zeros(n)
    return rmt.EnsembleSpec(n, zeros, zeros, t, seed)


def gue_control_config(n, seed, n_samples, **kw):
    pm0 = ms.point_mass(0.0)
    return hz.ExperimentConfig(ensemble=gue_control_spec(n, seed),
                               n_samples=n_samples, mu1=pm0, mu2=pm0, t=1.0, **kw)


# --- KS statistic ---

def test_ks_one_sample_quantile_grid():
    # x_i = (i - 1/2)/n against the identity CDF leaves exactly 1/(2n).
    n = 10
    x = (np.arange(1, n + 1) - 0.5) / n
    assert abs(hz.ks_statistic(x, lambda v: v) - 0.05) < 1e-12


def test_ks_two_sample_identical_is_zero():
    x = np.array([0.3, 1.2, -0.7, 2.0])
    assert hz.ks_statistic(x, x.copy()) == 0.0


def test_ks_two_sample_disjoint_is_one():
    assert hz.ks_statistic([0.0, 1.0, 2.0], [10.0, 11.0]) == 1.0


def test_ks_uniform_large_sample():
    rng = np.random.default_rng(915)
    x = rng.uniform(size=10000)
    assert hz.ks_statistic(x, lambda v: min(max(v, 0.0), 1.0)) <= 0.025


def test_ks_empty_rejected():
    with pytest.raises(ValueError):
        hz.ks_statistic([], lambda v: v)
    with pytest.raises(ValueError):
        hz.ks_statistic([1.0], [])


# --- config and report validation ---

def test_config_validation():
    pm0 = ms.point_mass(0.0)
    spec = gue_control_spec(20, 1)

    def build(**kw):
        base = dict(ensemble=spec, n_samples=5, mu1=pm0, mu2=pm0, t=1.0)
        base.update(kw)
        return hz.ExperimentConfig(**base)

    build()
    with pytest.raises(ValueError):
        build(n_samples=0)
    with pytest.raises(ValueError):
        build(ks_threshold=0.0)
    with pytest.raises(ValueError):
        build(ks_threshold=1.0)
    with pytest.raises(ValueError):
        build(chi=0.0)
    with pytest.raises(ValueError):
        build(chi=1.0 / 3.0)
    with pytest.raises(ValueError):
        build(t=0.5)
    with pytest.raises(ValueError):
        build(top_k=0)
    with pytest.raises(ValueError):
        build(workers=0)


def test_report_flag_must_match_statistic():
    kw = dict(tag="x", n_samples=1, threshold=0.5, config={}, stats={},
              records=(), ecdf_grid=np.zeros(2), ecdf_values=(),
              wall_time=0.0)
    hz.ExperimentReport(ks_statistic=0.4, passed=True, **kw)
    with pytest.raises(ValueError):
        hz.ExperimentReport(ks_statistic=0.6, passed=True, **kw)
    with pytest.raises(ValueError):
        hz.ExperimentReport(ks_statistic=-0.1, passed=False, **kw)


# --- Tracy-Widom experiment ---

def test_tw_single_sample_ks_formula():
    # With one sample the KS distance is max(F(x), 1 - F(x)) exactly.
    cfg = gue_control_config(80, 31, 1, ks_threshold=0.999)
    rep = hz.run_tw_experiment(cfg)
    x = rep.records[0]["value"]
    ev = tw.TWEvaluator(40)
    f = hz.tw_cdf_extended(ev, x)
    assert abs(rep.ks_statistic - max(f, 1.0 - f)) < 1e-15


def test_tw_gue_control_small():
    cfg = gue_control_config(150, 7, 300, ks_threshold=0.12)
    rep = hz.run_tw_experiment(cfg)
    assert rep.passed
    assert abs(rep.stats["e_plus"] - 2.0) < 1e-8
    assert abs(rep.stats["gamma"] - 1.0) < 1e-8
    assert abs(rep.stats["mean_rescaled"] - rep.stats["tw_mean"]) < 0.25
    assert len(rep.records) == 300
    assert rep.n_samples == 300
    assert 0.0 <= rep.ks_statistic <= 1.0
    # the ecdf trace spans the sampled values
    assert rep.ecdf_values[0][0] >= 0.0
    assert rep.ecdf_values[0][-1] == 1.0


def test_tw_worker_count_invariant():
    serial = hz.run_tw_experiment(gue_control_config(100, 13, 60))
    pooled = hz.run_tw_experiment(gue_control_config(100, 13, 60, workers=3))
    assert serial.ks_statistic == pooled.ks_statistic
    assert serial.records == pooled.records


# --- local law experiment ---

def test_local_law_record_recompute():
    # Rebuild the first sample at the smallest size from scratch and match
    # the recorded entry error bit for bit: pins the stream keying, the
    # z anchor at the continuum edge, and the atomic theory side.
    from freeconv import subordination as sub

    n = 40
    mu1 = ms.uniform(-1.0, 1.0)
    seed = 3
    spec = rmt.EnsembleSpec(n, ms.quantiles(mu1, n), ms.quantiles(mu1, n), 0.0, seed)
    cfg = hz.ExperimentConfig(ensemble=spec, n_samples=2, mu1=mu1, mu2=mu1,
                              t=0.0, sizes=(40, 60, 80), ks_threshold=0.999)
    rep = hz.run_local_law_experiment(cfg)

    a = ms.quantiles(mu1, n)
    mu_atom = ms.atoms(a, np.full(n, 1.0 / n))
    z = eg.find_edge_stability(mu1, mu1, 0.0).e_plus + 1j * n ** (-0.6)
    omega = sub.solve(sub.SubordinationQuery(mu_atom, mu_atom, 0.0, z)).omega1
    u = rmt.sample_haar_unitary(n, rmt.sample_stream(seed, 0))
    b_tilde = (u * a) @ u.conj().T
    h = b_tilde.copy()
    h[np.diag_indices(n)] += a
    probe = rmt.resolvent_probe(h, b_tilde, 0.0, z)
    err = float(np.max(np.abs(probe.g_diag - 1.0 / (a - omega))))

    first = rep.records[0]
    assert first["size"] == 40 and first["sample_index"] == 0
    assert first["entry_error"] == err
    assert rep.ks_statistic == rep.stats["decay_ratio"]


def test_local_law_needs_three_sizes():
    cfg = gue_control_config(40, 1, 2, sizes=(100, 200))
    with pytest.raises(ValueError):
        hz.run_local_law_experiment(cfg)


def test_local_law_report_structure():
    n = 40
    mu1 = ms.uniform(-1.0, 1.0)
    spec = rmt.EnsembleSpec(n, ms.quantiles(mu1, n), ms.quantiles(mu1, n), 0.0, 9)
    cfg = hz.ExperimentConfig(ensemble=spec, n_samples=4, mu1=mu1, mu2=mu1,
                              t=0.0, sizes=(40, 60, 80), ks_threshold=0.999)
    rep = hz.run_local_law_experiment(cfg)
    per_size = rep.stats["per_size"]
    assert sorted(per_size) == ["40", "60", "80"]
    for block in per_size.values():
        assert set(block) == {"median_entry_error", "median_avg_error",
                              "median_upsilon", "median_subordination_error"}
    medians = rep.stats["entry_medians"]
    assert rep.stats["decay_ratio"] == medians[-1] / medians[0]
    assert len(rep.records) == 12
    assert rep.config["sizes"] == [40, 60, 80]
    # averaging over the diagonal can never exceed the worst entry
    for row in rep.records:
        assert row["avg_error"] <= row["entry_error"] + 1e-12


# --- rigidity experiment ---

def test_rigidity_deterministic_embedding():
    # B = 0 and t = 0 leave H = diag(a); with a at the quantiles the
    # deviations are just the classical-location interpolation error.
    n, k = 200, 20
    mu1 = ms.uniform(-1.0, 1.0)
    pm0 = ms.point_mass(0.0)
    spec = rmt.EnsembleSpec(n, ms.quantiles(mu1, n), np.zeros(n), 0.0, 5)
    cfg = hz.ExperimentConfig(ensemble=spec, n_samples=3, mu1=mu1, mu2=pm0,
                              t=0.0, top_k=k, rigidity_limit=1.0)
    rep = hz.run_rigidity_experiment(cfg)
    assert rep.passed
    assert rep.stats["percentile_95"] <= 0.05
    assert rep.stats["max_r"] >= rep.stats["median_r"]


def test_rigidity_gue_control_small():
    cfg = gue_control_config(300, 17, 30, top_k=50, rigidity_limit=10.0)
    rep = hz.run_rigidity_experiment(cfg)
    assert rep.passed
    assert rep.stats["percentile_95"] < 8.0
    assert rep.config["top_k"] == 50
    assert len(rep.records) == 30


# --- flow comparison ---

def test_dbm_degenerate_flow_is_identity():
    cfg = gue_control_config(60, 23, 20)
    rep = hz.run_dbm_comparison(cfg, t0=0.0)
    assert rep.ks_statistic == 0.0
    assert rep.passed
    assert rep.stats["t0"] == 0.0
    for row in rep.records:
        assert row["value"] == row["value_flowed"]


def test_dbm_gue_control():
    # Adding an independent increment to a t = 1 control sample keeps the
    # rescaled top eigenvalue in the same family, so both sides match.
    cfg = gue_control_config(200, 29, 400, ks_threshold=0.08)
    rep = hz.run_dbm_comparison(cfg)
    assert rep.passed
    expected_t0 = 200 ** (-1.0 / 3.0 + 0.1)
    assert abs(rep.stats["t0"] - expected_t0) < 1e-12
    assert rep.stats["e_plus_flowed"] > rep.stats["e_plus_base"]


def test_dbm_worker_count_invariant():
    serial = hz.run_dbm_comparison(gue_control_config(80, 37, 40))
    pooled = hz.run_dbm_comparison(gue_control_config(80, 37, 40, workers=2))
    assert serial.ks_statistic == pooled.ks_statistic
    assert serial.records == pooled.records


# --- report files ---

def test_write_report_json_and_csv(tmp_path):
    cfg = gue_control_config(60, 41, 25)
    rep = hz.run_tw_experiment(cfg)
    json_path = tmp_path / "report.json"
    csv_path = tmp_path / "report.csv"
    hz.write_report(rep, json_path=str(json_path), csv_path=str(csv_path))

    loaded = json.loads(json_path.read_text())
    assert loaded == json.loads(json.dumps(rep.to_json_dict()))
    assert "wall_time" not in loaded
    assert loaded["pass"] == rep.passed

    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == "sample_index,value"
    assert len(lines) == 26
    value = float(lines[1].split(",")[1])
    assert value == rep.records[0]["value"]


def test_write_report_rerun_byte_identical(tmp_path):
    paths = []
    for label in ("first", "second"):
        cfg = gue_control_config(60, 43, 25)
        rep = hz.run_tw_experiment(cfg)
        json_path = tmp_path / ("%s.json" % label)
        csv_path = tmp_path / ("%s.csv" % label)
        hz.write_report(rep, json_path=str(json_path), csv_path=str(csv_path))
        paths.append((json_path, csv_path))
    assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
    assert paths[0][1].read_bytes() == paths[1][1].read_bytes()
