"""Monte Carlo experiments against the limiting edge theory.

Four experiments: Tracy-Widom rescaled top-eigenvalue law, local-law
resolvent decay across sizes, eigenvalue rigidity against classical
locations, and the short-time flow comparison with paired samples.  Each
returns an ExperimentReport whose decision statistic is compared against
a threshold; for the two distributional experiments that statistic is a
Kolmogorov-Smirnov distance, for the other two it is the decay ratio or
the rigidity percentile reported in the same slot.
"""

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import edge as eg
from . import measure as ms
from . import rmt
from . import subordination as sub
from . import tracywidom as tw


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: rmt.EnsembleSpec
    n_samples: int
    mu1: ms.Measure
    mu2: ms.Measure
    t: float
    ks_threshold: float = 0.05
    eta_exponent: float = 0.6
    chi: float = 0.1
    sizes: tuple = ()
    top_k: int = 100
    rigidity_limit: float = 10.0
    workers: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0.0 < self.ks_threshold < 1.0:
            raise ValueError("ks_threshold must lie in (0, 1)")
        if not 0.0 < self.chi < 1.0 / 3.0:
            raise ValueError("chi must lie in (0, 1/3)")
        if self.ensemble.t != self.t:
            raise ValueError("ensemble time and theory time must agree")
        if self.top_k < 1 or self.workers < 1:
            raise ValueError("top_k and workers must be >= 1")
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))


@dataclass(frozen=True)
class ExperimentReport:
    tag: str
    n_samples: int
    ks_statistic: float
    threshold: float
    passed: bool
    config: dict
    stats: dict
    records: tuple
    ecdf_grid: np.ndarray
    ecdf_values: tuple
    wall_time: float

    def __post_init__(self):
        if self.ks_statistic < 0:
            raise ValueError("decision statistic must be >= 0")
        if self.passed != (self.ks_statistic <= self.threshold):
            raise ValueError("pass flag must match statistic <= threshold")

    def to_json_dict(self):
        """Schema: tag, config echo, ks, pass, stats.  Wall time stays out."""
        return {
            "tag": self.tag,
            "n_samples": self.n_samples,
            "ks_statistic": self.ks_statistic,
            "threshold": self.threshold,
            "pass": self.passed,
            "config": self.config,
            "stats": self.stats,
        }


def ks_statistic(samples, cdf_or_samples):
    """One-sample (against a CDF callable) or two-sample KS sup-distance."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("empty sample")
    if callable(cdf_or_samples):
        f = np.array([cdf_or_samples(v) for v in x])
        n = x.size
        upper = np.max(np.arange(1, n + 1) / n - f)
        lower = np.max(f - np.arange(0, n) / n)
        return float(max(upper, lower))
    y = np.sort(np.asarray(cdf_or_samples, dtype=float))
    if y.size == 0:
        raise ValueError("empty sample")
    pooled = np.concatenate([x, y])
    fx = np.searchsorted(x, pooled, side="right") / x.size
    fy = np.searchsorted(y, pooled, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def tw_cdf_extended(ev, s):
    """F2 extended beyond the evaluator window by its saturated tails."""
    if s < -12.0:
        return 0.0
    if s > 8.0:
        return 1.0
    return tw.tw2_cdf(ev, s)


def _checked_edge(mu1, mu2, t):
    """Edge report, with the stability residual verified before sampling."""
    rep = eg.find_edge_stability(mu1, mu2, t)
    diag = eg.stability_diagnostics(mu1, mu2, t, complex(rep.e_plus), rep)
    if abs(diag.s_value) > 1e-9:
        raise RuntimeError("edge stability residual %.3e exceeds 1e-9"
                           % abs(diag.s_value))
    return rep


def _map_indexed(fn, count, workers):
    if workers <= 1:
        return [fn(k) for k in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def _ecdf(grid, values):
    return np.searchsorted(np.sort(values), grid, side="right") / len(values)


def _measure_echo(mu):
    return {"family": mu.family, "params": list(mu.params)}


def _config_echo(cfg, **extra):
    echo = {
        "n": cfg.ensemble.n,
        "seed": cfg.ensemble.seed,
        "t": cfg.t,
        "n_samples": cfg.n_samples,
        "mu1": _measure_echo(cfg.mu1),
        "mu2": _measure_echo(cfg.mu2),
        "ks_threshold": cfg.ks_threshold,
        "eta_exponent": cfg.eta_exponent,
        "chi": cfg.chi,
        "workers": cfg.workers,
    }
    echo.update(extra)
    return echo


def _report(tag, cfg, statistic, threshold, stats, records, values_sets,
            wall, extra_echo=None):
    primary = values_sets[0]
    lo, hi = float(np.min(primary)), float(np.max(primary))
    if hi <= lo:
        hi = lo + 1.0
    grid = np.linspace(lo, hi, 101)
    return ExperimentReport(
        tag=tag,
        n_samples=cfg.n_samples,
        ks_statistic=float(statistic),
        threshold=float(threshold),
        passed=bool(statistic <= threshold),
        config=_config_echo(cfg, **(extra_echo or {})),
        stats=stats,
        records=tuple(records),
        ecdf_grid=grid,
        ecdf_values=tuple(_ecdf(grid, v) for v in values_sets),
        wall_time=wall,
    )


def run_tw_experiment(cfg):
    """Rescaled top eigenvalue against the Tracy-Widom beta=2 law."""
    start = time.perf_counter()
    rep = _checked_edge(cfg.mu1, cfg.mu2, cfg.t)
    ev = tw.TWEvaluator(40)
    n = cfg.ensemble.n
    scale = rep.gamma * n ** (2.0 / 3.0)

    def one(k):
        sample = rmt.assemble(cfg.ensemble, rmt.sample_stream(cfg.ensemble.seed, k))
        return scale * (sample.eigenvalues[0] - rep.e_plus)

    xs = np.array(_map_indexed(one, cfg.n_samples, cfg.workers))
    ks = ks_statistic(xs, lambda s: tw_cdf_extended(ev, s))
    stats = {
        "e_plus": rep.e_plus,
        "gamma": rep.gamma,
        "mean_rescaled": float(np.mean(xs)),
        "variance_rescaled": float(np.var(xs)),
        "tw_mean": tw.tw2_mean(ev),
        "tw_variance": tw.tw2_variance(ev),
    }
    records = [{"sample_index": k, "value": float(v)} for k, v in enumerate(xs)]
    return _report("tw", cfg, ks, cfg.ks_threshold, stats, records, (xs,),
                   time.perf_counter() - start)


def run_local_law_experiment(cfg):
    """Entrywise resolvent error decay across at least three sizes.

    The decision statistic is the ratio of the largest-size median
    entrywise error to the smallest-size one; the atomic quantile
    systems feed the subordination solver for the theory side.
    """
    start = time.perf_counter()
    if len(cfg.sizes) < 3:
        raise ValueError("local-law experiment needs at least three sizes")
    edge_rep = _checked_edge(cfg.mu1, cfg.mu2, cfg.t)
    per_size = {}
    records = []
    largest_errors = None
    for n in cfg.sizes:
        a = ms.quantiles(cfg.mu1, n)
        b = ms.quantiles(cfg.mu2, n)
        mu_a = ms.atoms(a, np.full(n, 1.0 / n))
        mu_b = ms.atoms(b, np.full(n, 1.0 / n))
        z = edge_rep.e_plus + 1j * n ** (-cfg.eta_exponent)
        omega_a = sub.solve(sub.SubordinationQuery(mu_a, mu_b, cfg.t, z)).omega1
        theory_diag = 1.0 / (a - omega_a)

        def one(k, n=n, a=a, b=b, z=z, theory=theory_diag, omega=omega_a):
            rng = rmt.sample_stream(cfg.ensemble.seed, k)
            u = rmt.sample_haar_unitary(n, rng)
            w = rmt.sample_gue(n, rng) if cfg.t > 0 else None
            b_tilde = (u * b) @ u.conj().T
            h = b_tilde.copy()
            h[np.diag_indices(n)] += a
            if w is not None:
                h = h + math.sqrt(cfg.t) * w
            probe = rmt.resolvent_probe(h, b_tilde, cfg.t, z)
            diff = probe.g_diag - theory
            return (float(np.max(np.abs(diff))), abs(complex(np.mean(diff))),
                    abs(probe.upsilon), abs(probe.omega_a_c - omega))

        rows = _map_indexed(one, cfg.n_samples, cfg.workers)
        entry, avg, ups, subord = (np.array(col) for col in zip(*rows))
        per_size[n] = {
            "median_entry_error": float(np.median(entry)),
            "median_avg_error": float(np.median(avg)),
            "median_upsilon": float(np.median(ups)),
            "median_subordination_error": float(np.median(subord)),
        }
        for k in range(cfg.n_samples):
            records.append({"size": n, "sample_index": k,
                            "entry_error": float(entry[k]),
                            "avg_error": float(avg[k]),
                            "upsilon": float(ups[k]),
                            "subordination_error": float(subord[k])})
        largest_errors = entry
    medians = [per_size[n]["median_entry_error"] for n in cfg.sizes]
    ratio = medians[-1] / medians[0]
    stats = {"e_plus": edge_rep.e_plus, "per_size": {str(n): per_size[n] for n in cfg.sizes},
             "entry_medians": medians, "decay_ratio": ratio}
    return _report("local-law", cfg, ratio, cfg.ks_threshold, stats, records,
                   (largest_errors,), time.perf_counter() - start,
                   extra_echo={"sizes": list(cfg.sizes)})


def run_rigidity_experiment(cfg):
    """95th percentile of the rescaled classical-location deviations."""
    start = time.perf_counter()
    n = cfg.ensemble.n
    gammas = eg.classical_locations(cfg.mu1, cfg.mu2, cfg.t, n, cfg.top_k)
    weights = (n ** (2.0 / 3.0)) * np.arange(1, cfg.top_k + 1) ** (1.0 / 3.0)

    def one(k):
        sample = rmt.assemble(cfg.ensemble, rmt.sample_stream(cfg.ensemble.seed, k))
        dev = np.abs(sample.eigenvalues[:cfg.top_k] - gammas)
        return float(np.max(weights * dev))

    rs = np.array(_map_indexed(one, cfg.n_samples, cfg.workers))
    pct = float(np.percentile(rs, 95))
    stats = {"percentile_95": pct, "max_r": float(np.max(rs)),
             "median_r": float(np.median(rs)), "top_k": cfg.top_k}
    records = [{"sample_index": k, "value": float(v)} for k, v in enumerate(rs)]
    return _report("rigidity", cfg, pct, cfg.rigidity_limit, stats, records,
                   (rs,), time.perf_counter() - start,
                   extra_echo={"top_k": cfg.top_k, "rigidity_limit": cfg.rigidity_limit})


def run_dbm_comparison(cfg, t0=None):
    """Two-sample KS between rescaled top eigenvalues before and after
    a short flow of length t0 = N^(-1/3 + chi), with the unitary shared
    inside each pair."""
    start = time.perf_counter()
    n = cfg.ensemble.n
    if t0 is None:
        t0 = n ** (-1.0 / 3.0 + cfg.chi)
    base = _checked_edge(cfg.mu1, cfg.mu2, cfg.t)
    flowed = _checked_edge(cfg.mu1, cfg.mu2, cfg.t + t0) if t0 > 0 else base
    pow23 = n ** (2.0 / 3.0)

    def one(k):
        rng = rmt.sample_stream(cfg.ensemble.seed, k)
        u = rmt.sample_haar_unitary(n, rng)
        w_base = rmt.sample_gue(n, rng) if cfg.t > 0 else None
        h = rmt.build_matrix(cfg.ensemble.a_diag, cfg.ensemble.b_diag, u,
                             cfg.t, w_base)
        lam0 = np.linalg.eigvalsh(h)[-1]
        if t0 > 0:
            h = h + math.sqrt(t0) * rmt.sample_gue(n, rng)
            lam1 = np.linalg.eigvalsh(h)[-1]
        else:
            lam1 = lam0
        return (base.gamma * pow23 * (lam0 - base.e_plus),
                flowed.gamma * pow23 * (lam1 - flowed.e_plus))

    pairs = _map_indexed(one, cfg.n_samples, cfg.workers)
    x0 = np.array([p[0] for p in pairs])
    x1 = np.array([p[1] for p in pairs])
    ks = ks_statistic(x0, x1)
    stats = {"t0": float(t0), "e_plus_base": base.e_plus, "e_plus_flowed": flowed.e_plus,
             "gamma_base": base.gamma, "gamma_flowed": flowed.gamma,
             "mean_base": float(np.mean(x0)), "mean_flowed": float(np.mean(x1))}
    records = [{"sample_index": k, "value": float(a), "value_flowed": float(b)}
               for k, (a, b) in enumerate(pairs)]
    return _report("dbm", cfg, ks, cfg.ks_threshold, stats, records, (x0, x1),
                   time.perf_counter() - start, extra_echo={"t0": float(t0)})


def write_report(report, json_path=None, csv_path=None):
    """JSON with stable key order; CSV record rows at 17 significant digits."""
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    if csv_path is not None and report.records:
        names = list(report.records[0])
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for row in report.records:
                writer.writerow([_format_cell(row[name]) for name in names])


def _format_cell(value):
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)
