"""Experiment pipelines: run a config, persist artifacts, report pass/fail.

Every pipeline is deterministic given (config, seed): CSV bodies, the
metrics JSON, and plot data reproduce byte for byte on re-run.  Wall
time lives only in report.json, which is the one non-reproducible file.
Tolerance checks are evaluated only when the config declares ``tol``
(plus a handful of always-on exact identities); the CLI exits 0 only
when every declared check passes.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import kolmogi

from . import extremes, hitting, measure, mixing, pointprocess
from .config import ExperimentConfig, emit_config
from .dynamics import MapSystem, birkhoff_log_expansion, expansion_times
from .observables import LevelSequence, ObservableSpec, level
from .orbits import child_rng, lebesgue_start

__all__ = ["RunReport", "run", "build_system", "build_spec", "build_model", "csv_text", "json_text"]


def csv_text(header, rows) -> str:
    """CSV body: lowercase header, '.' decimal, LF endings, repr floats."""
    out = [",".join(h.lower() for h in header)]
    for row in rows:
        out.append(",".join(_cell(v) for v in row))
    return "\n".join(out) + "\n"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def json_text(obj) -> str:
    def _default(o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not JSON serialisable: {type(o)}")

    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


@dataclass
class RunReport:
    experiment: str
    config_text: str
    metrics: dict
    checks: dict
    passed: bool
    files: list
    wall_time_s: float


def build_system(cfg: ExperimentConfig) -> MapSystem:
    if cfg.system == "doubling":
        return MapSystem.doubling()
    if cfg.system == "quadratic":
        return MapSystem.quadratic(2.0 if cfg.a is None else cfg.a)
    if cfg.system == "torus-doubling":
        return MapSystem.torus_doubling()
    if cfg.system == "perturbed-expanding":
        kw = {}
        if cfg.epsilon is not None:
            kw["eps"] = cfg.epsilon
        if cfg.bump_center is not None:
            kw["bump_center"] = cfg.bump_center
        if cfg.bump_radius is not None:
            kw["bump_radius"] = cfg.bump_radius
        if cfg.contraction_delta is not None:
            kw["contraction_delta"] = cfg.contraction_delta
        return MapSystem.perturbed_expanding(**kw)
    return MapSystem.intermittent(0.6 if cfg.gamma is None else cfg.gamma)


def _zeta(cfg: ExperimentConfig, system: MapSystem):
    if system.space.dim == 2:
        return tuple(cfg.zeta)
    return cfg.zeta[0]


def build_spec(cfg: ExperimentConfig, system: MapSystem) -> ObservableSpec:
    return ObservableSpec(
        cfg.observable, _zeta(cfg, system), system.space, alpha=cfg.alpha, top=cfg.obs_max
    )


def build_model(cfg: ExperimentConfig, system: MapSystem):
    try:
        return measure.density_model(system)
    except Exception:
        points = cfg.budget or 10 ** 7
        return measure.build_histogram(system, points, cfg.seed + 777_001)


def _default_y(kind: str) -> float:
    return {"g1": 0.0, "g2": 1.0, "g3": -1.0}[kind]


# ---------------------------------------------------------------------------
# pipelines: each returns (metrics, checks, files)
# ---------------------------------------------------------------------------


def _run_kac(cfg):
    system = build_system(cfg)
    model = build_model(cfg, system)
    z = _zeta(cfg, system)
    mu = measure.ball_measure(model, z, cfg.delta)
    cap = cfg.cap or hitting.default_cap(mu)
    sample = hitting.return_gaps(
        system, z, cfg.delta, cfg.m, cfg.seed, cap,
        streams=cfg.streams, budget=cfg.budget, model=model,
    )
    res = hitting.kac_from_sample(sample)
    metrics = {
        "mu_ball": mu,
        "product": res.product,
        "stderr": res.stderr,
        "exceeded_fraction": res.exceeded_fraction,
    }
    checks = {"exceeded_below_1pct": (res.exceeded_fraction, 0.01, not res.flagged)}
    if cfg.tol is not None:
        dev = abs(res.product - 1.0)
        checks["kac_product"] = (dev, cfg.tol, dev <= cfg.tol)
    files = {
        "returns.csv": csv_text(
            ("sample", "return_time"), enumerate(sample.times.tolist())
        )
    }
    return metrics, checks, files


def _run_hts(cfg, conditioned=False):
    system = build_system(cfg)
    model = build_model(cfg, system)
    z = _zeta(cfg, system)
    fn = hitting.rts_ecdf if conditioned else hitting.hts_ecdf
    curve = fn(system, z, cfg.delta, cfg.t_grid, cfg.m, cfg.cap, cfg.seed, model)
    sup_dev = float(np.max(np.abs(curve.survival - np.exp(-curve.t))))
    fit = None
    try:
        fit = hitting.extremal_index_fit(curve.t, curve.survival)
    except Exception:
        pass
    metrics = {
        "mu_ball": curve.mu_ball,
        "sup_dev_vs_exp": sup_dev,
        "exceeded_fraction": curve.exceeded_fraction,
    }
    if fit is not None:
        metrics["theta_hat"] = fit.theta
        metrics["theta_flagged"] = fit.flagged
    checks = {}
    if cfg.tol is not None:
        checks["sup_dev_vs_exp"] = (sup_dev, cfg.tol, sup_dev <= cfg.tol)
    rows = zip(
        curve.t.tolist(),
        curve.survival.tolist(),
        curve.stderr.tolist(),
        [curve.exceeded_fraction] * len(curve.t),
        np.exp(-curve.t).tolist(),
    )
    files = {
        "survival.csv": csv_text(
            ("t", "survival", "stderr", "exceeded_fraction", "exp_minus_t"), rows
        )
    }
    return metrics, checks, files


def _run_evl(cfg):
    system = build_system(cfg)
    model = build_model(cfg, system)
    spec = build_spec(cfg, system)
    seq = LevelSequence.for_model(spec, model)
    curve = extremes.evl_curve(system, spec, seq, cfg.n, cfg.m, cfg.y_grid, cfg.seed)
    max_dev = float(np.max(np.abs(curve.empirical - curve.analytic)))
    metrics = {
        "max_abs_dev": max_dev,
        "infinite_maxima": curve.stats.infinite,
    }
    try:
        fit = extremes.gev_fit(curve.stats.maxima, on_infinite="drop")
        metrics.update(
            {"gev_location": fit.location, "gev_scale": fit.scale, "gev_shape": fit.shape}
        )
    except Exception:
        pass
    violations = 0
    sums = []
    for k, u in enumerate(curve.u):
        table = extremes.ExceedanceCountTable(
            f"y={curve.y[k]!r}", float(u), cfg.n, curve.stats.counts[:, k]
        )
        chk = extremes.bonferroni_check(table)
        violations += 0 if chk["ok"] else 1
        sums.append((curve.y[k], u, chk["upper"], chk["middle"], chk["lower"]))
    metrics["bonferroni_violations"] = violations
    checks = {"bonferroni": (violations, 0, violations == 0)}
    if cfg.tol is not None:
        checks["max_abs_dev"] = (max_dev, cfg.tol, max_dev <= cfg.tol)
    files = {
        "evl_curve.csv": csv_text(
            ("y", "u_n", "empirical", "analytic", "stderr"),
            zip(curve.y.tolist(), curve.u.tolist(), curve.empirical.tolist(),
                curve.analytic.tolist(), curve.stderr.tolist()),
        ),
        "exceedance_sums.csv": csv_text(
            ("y", "u_n", "sum_counts", "blocks_exceeding", "pair_lower"), sums
        ),
    }
    return metrics, checks, files


def _run_pp(cfg, hit_based: bool):
    system = build_system(cfg)
    model = build_model(cfg, system)
    z = _zeta(cfg, system)
    if hit_based:
        procs = pointprocess.htpp_ensemble(
            system, z, cfg.delta, cfg.m, cfg.horizon, cfg.seed, model
        )
    else:
        spec = build_spec(cfg, system)
        seq = LevelSequence.for_model(spec, model)
        u = level(seq, cfg.n, cfg.y if cfg.y is not None else _default_y(spec.kind))
        procs = pointprocess.epp_at_level(system, spec, u, cfg.m, cfg.horizon, cfg.seed, model)
    window = (0.0, min(2.0, cfg.horizon))
    count_res = pointprocess.poisson_count_test(procs, window)
    ks, n_gaps = pointprocess.interarrival_test(procs)
    # reference: the same window structure fed with i.i.d. exponential
    # gaps; at short horizons both share the window-truncation bias
    oracle = pointprocess.iid_comparison_processes(
        len(procs), cfg.horizon, procs[0].v, cfg.seed + 555_001
    )
    dyn_gaps = pointprocess.pooled_gaps(procs)
    orc_gaps = pointprocess.pooled_gaps(oracle)
    from scipy.stats import ks_2samp

    two_sample = float(ks_2samp(dyn_gaps, orc_gaps).statistic)
    n1, n2 = dyn_gaps.size, orc_gaps.size
    band = float(kolmogi(0.01)) * math.sqrt((n1 + n2) / (n1 * n2))
    metrics = {
        "tv_counts": count_res.tv,
        "mean_count": count_res.mean_count,
        "interarrival_ks": ks,
        "interarrival_gaps": n_gaps,
        "interarrival_ks_oracle": float(
            pointprocess.interarrival_test(oracle)[0]
        ),
        "gap_two_sample_ks": two_sample,
        "gap_two_sample_band_1pct": band,
    }
    checks = {"gap_two_sample_ks": (two_sample, band, two_sample <= band)}
    if cfg.horizon >= 3.0:
        ind = pointprocess.increment_independence_test(procs, (0.0, 1.0), (2.0, 3.0))
        metrics["independence_defect"] = ind.defect
        metrics["independence_union_defect"] = ind.union_defect
        if cfg.tol is not None:
            checks["independence_defect"] = (ind.defect, cfg.tol, ind.defect <= cfg.tol)
    if cfg.tol is not None:
        checks["tv_counts"] = (count_res.tv, cfg.tol, count_res.tv <= cfg.tol)
    rows = []
    for rid, p in enumerate(procs):
        for idx in p.indices.tolist():
            rows.append((rid, idx, idx / p.v))
    files = {"events.csv": csv_text(("run_id", "index", "rescaled_time"), rows)}
    return metrics, checks, files


def _run_duality(cfg):
    system = build_system(cfg)
    model = build_model(cfg, system)
    spec = build_spec(cfg, system)
    seq = LevelSequence.for_model(spec, model)
    res = extremes.duality_check(system, spec, seq, cfg.m, cfg.n, cfg.seed)
    metrics = {"mismatches": res.mismatches, "samples": res.samples}
    checks = {"mismatches": (res.mismatches, 0, res.mismatches == 0)}
    rows = zip(
        range(res.samples),
        res.n.tolist(),
        res.y.tolist(),
        res.max_side.astype(int).tolist(),
        res.entry_side.astype(int).tolist(),
    )
    files = {"duality.csv": csv_text(("sample", "n", "y", "max_le_u", "no_entry"), rows)}
    return metrics, checks, files


def _run_dprime(cfg):
    system = build_system(cfg)
    model = build_model(cfg, system)
    spec = build_spec(cfg, system)
    seq = LevelSequence.for_model(spec, model)
    y = cfg.y if cfg.y is not None else _default_y(spec.kind)
    u = level(seq, cfg.n, y)
    ks = [int(v) for v in cfg.k_values]
    max_lag = cfg.lags or (cfg.n // min(ks))
    table = mixing.build_pair_table(
        system, spec, u, max_lag, budget=cfg.budget, seed=cfg.seed
    )
    rows = []
    metrics = {"marginal": table.marginal, "level": u, "samples": table.samples}
    for k in ks:
        s = mixing.dprime_sum(table, cfg.n, k)
        base = mixing.iid_baseline(table, cfg.n, k)
        rows.append((k, s, base))
        metrics[f"sum_k{k}"] = s
        metrics[f"baseline_k{k}"] = base
    files = {"dprime.csv": csv_text(("k", "sum", "iid_baseline"), rows)}
    return metrics, {}, files


def _run_d3(cfg):
    system = build_system(cfg)
    model = build_model(cfg, system)
    spec = build_spec(cfg, system)
    seq = LevelSequence.for_model(spec, model)
    res = mixing.d3_gamma(
        system, spec, seq, cfg.n, cfg.t_shift, [(0, cfg.block_len)], cfg.m, cfg.seed, y=cfg.y
    )
    metrics = {"estimate": res.estimate, "stderr": res.stderr, "p_exceed": res.p_exceed}
    checks = {}
    if cfg.tol is not None:
        checks["abs_estimate"] = (abs(res.estimate), cfg.tol, abs(res.estimate) <= cfg.tol)
    return metrics, checks, {"d3.json": json_text(metrics)}


def _run_mixing(cfg):
    system = build_system(cfg)
    z = _zeta(cfg, system)
    res = mixing.uniform_mixing_gamma(
        system, z, cfg.delta, cfg.n, cfg.k_cap, cfg.l_cap, length=cfg.budget, seed=cfg.seed
    )
    metrics = {"gamma": res.value, "skipped_cylinders": res.skipped, "pairs": res.pairs}
    checks = {}
    if cfg.tol is not None:
        checks["gamma"] = (res.value, cfg.tol, res.value <= cfg.tol)
    return metrics, checks, {"mixing.json": json_text(metrics)}


def _run_expansivity(cfg):
    system = build_system(cfg)
    rng = child_rng(cfg.seed, 0)
    x0 = lebesgue_start(system, rng, cfg.m)
    avgs = birkhoff_log_expansion(system, x0, cfg.n)
    etimes = expansion_times(system, x0, cfg.lam, cfg.n)
    frac_above = float(np.mean(avgs >= cfg.lam))
    frac_finite = float(np.mean(etimes > 0))
    metrics = {
        "fraction_above_lambda": frac_above,
        "fraction_finite_expansion_time": frac_finite,
        "min_average": float(avgs.min()),
    }
    checks = {}
    if cfg.tol is not None:
        checks["fraction_above_lambda"] = (frac_above, 1 - cfg.tol, frac_above >= 1 - cfg.tol)
    files = {
        "expansivity.csv": csv_text(
            ("start", "birkhoff_average", "expansion_time"),
            zip(range(cfg.m), avgs.tolist(), etimes.tolist()),
        )
    }
    return metrics, checks, files


_PIPELINES = {
    "kac": _run_kac,
    "hts": lambda cfg: _run_hts(cfg, conditioned=False),
    "rts": lambda cfg: _run_hts(cfg, conditioned=True),
    "evl-curve": _run_evl,
    "epp-poisson": lambda cfg: _run_pp(cfg, hit_based=False),
    "htpp-poisson": lambda cfg: _run_pp(cfg, hit_based=True),
    "duality-check": _run_duality,
    "dprime": _run_dprime,
    "d3": _run_d3,
    "mixing": _run_mixing,
    "expansivity": _run_expansivity,
}


def run(cfg: ExperimentConfig, out_dir=None) -> RunReport:
    """Execute the configured pipeline and persist its artifacts."""
    t0 = time.perf_counter()
    config_text = emit_config(cfg)
    try:
        metrics, checks, files = _PIPELINES[cfg.experiment](cfg)
    except Exception as exc:
        raise RuntimeError(f"experiment {cfg.experiment!r} failed: {exc}") from exc
    passed = all(ok for (_, _, ok) in checks.values())
    wall = time.perf_counter() - t0

    out = Path(out_dir or cfg.out or os.environ.get("ORBITLAB_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for name, body in sorted(files.items()):
        (out / name).write_text(body, encoding="utf-8", newline="\n")
        manifest.append(name)
    payload = {
        "schema_version": 1,
        "experiment": cfg.experiment,
        "config": config_text,
        "metrics": metrics,
        "checks": {k: {"value": v, "bound": b, "ok": ok} for k, (v, b, ok) in checks.items()},
        "passed": passed,
    }
    (out / "metrics.json").write_text(json_text(payload), encoding="utf-8", newline="\n")
    manifest.append("metrics.json")
    report = dict(payload, wall_time_s=wall, manifest=manifest + ["report.json"])
    (out / "report.json").write_text(json_text(report), encoding="utf-8", newline="\n")
    return RunReport(cfg.experiment, config_text, metrics, checks, passed, manifest, wall)
