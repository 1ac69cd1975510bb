"""Acceptance suite: one test per criterion, exact sizes and tolerances.

Each criterion builds its data through the library pipelines with a
fixed seed, emits the same CSV artifacts the CLI would, and prints one
PASS/FAIL line (visible with ``pytest -s``).  The final criterion
rebuilds every previous one with the same seed and demands byte-identical
artifacts.

Oracles (tests/oracles.py) are independent of the code under test: the
run-length Markov chain supplies exact laws at the fixed point of the
doubling map, and windowed renewal simulation supplies the i.i.d.
benchmarks for the Poisson tests.
"""

import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from orbitlab.dynamics import MapSystem
from orbitlab.extremes import (
    ExceedanceCountTable,
    block_stats,
    bonferroni_check,
    duality_check,
    evl_curve,
    gev_fit,
)
from orbitlab.hitting import extremal_index_fit, hts_ecdf, kac_check
from orbitlab.measure import (
    build_histogram,
    density_model,
    lebesgue_ratio_curve,
    save_histogram,
)
from orbitlab.mixing import build_pair_table, dprime_sum, iid_baseline
from orbitlab.observables import (
    LevelSequence,
    ObservableSpec,
    block_length_for_radius,
    g_inverse,
    level,
    tau,
)
from orbitlab.orbits import child_rng, lebesgue_start
from orbitlab.pointprocess import (
    IntervalRing,
    count_on_ring,
    epp_at_level,
    htpp_ensemble,
    iid_comparison_processes,
    increment_independence_test,
    interarrival_test,
    poisson_count_test,
    pooled_gaps,
)
from orbitlab.runner import csv_text, json_text
from orbitlab.dynamics import birkhoff_log_expansion

import oracles

DOUBLING = MapSystem.doubling()
TORUS = MapSystem.torus_doubling()
MODEL = density_model(DOUBLING)
TMODEL = density_model(TORUS)
ZETA = 0.37


def _report(num, name, ok, detail):
    line = f"ACCEPTANCE {num:>2} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def registry(tmp_path_factory):
    return {"_dir": tmp_path_factory.mktemp("acceptance"), "_entries": {}}


def _get(registry, name, builder):
    entries = registry["_entries"]
    if name not in entries:
        result = builder()
        out = registry["_dir"] / name
        out.mkdir(exist_ok=True)
        for fname, text in result["files"].items():
            (out / fname).write_text(text, encoding="utf-8", newline="\n")
        entries[name] = (builder, result)
    return entries[name][1]


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def build_duality():
    per_kind = {}
    total_mismatch = 0
    total_samples = 0
    files = {}
    for kind, extra, seed in (
        ("g1", {}, 0xC101),
        ("g2", {"alpha": 2.0}, 0xC102),
        ("g3", {"alpha": 2.0, "top": 1.0}, 0xC103),
    ):
        spec = ObservableSpec(kind, ZETA, DOUBLING.space, **extra)
        seq = LevelSequence(spec, 1.0, 2.0, 1)
        res = duality_check(DOUBLING, spec, seq, 3334, 10_000, seed)
        per_kind[kind] = res.mismatches
        total_mismatch += res.mismatches
        total_samples += res.samples
        files[f"duality_{kind}.csv"] = csv_text(
            ("sample", "n", "y", "max_le_u", "no_entry"),
            zip(
                range(res.samples),
                res.n.tolist(),
                res.y.tolist(),
                res.max_side.astype(int).tolist(),
                res.entry_side.astype(int).tolist(),
            ),
        )
    return {
        "metrics": {"mismatches": total_mismatch, "samples": total_samples, **per_kind},
        "files": files,
    }


def build_pp_identity():
    n = 10_000
    spec = ObservableSpec("g1", ZETA, DOUBLING.space)
    seq = LevelSequence(spec, 1.0, 2.0, 1)
    u = level(seq, n, 0.0)
    delta = float(g_inverse(spec, u))
    m, horizon = 1000, 10.0  # orbit length floor(v*horizon)+1 = 1e5 + 1
    eps = epp_at_level(DOUBLING, spec, u, m, horizon, 0xC2, MODEL)
    hps = htpp_ensemble(DOUBLING, ZETA, delta, m, horizon, 0xC2, MODEL)
    mismatches = sum(
        0 if np.array_equal(a.indices, b.indices) else 1 for a, b in zip(eps, hps)
    )
    rows = [
        (r, a.indices.size, b.indices.size, int(np.array_equal(a.indices, b.indices)))
        for r, (a, b) in enumerate(zip(eps, hps))
    ]
    return {
        "metrics": {
            "mismatched_orbits": mismatches,
            "orbits": m,
            "orbit_length": int(math.floor(horizon / MODEL_mu(delta))) + 1,
        },
        "files": {
            "pp_identity.csv": csv_text(
                ("run", "exceedance_events", "ball_events", "identical"), rows
            )
        },
    }


def MODEL_mu(delta):
    from orbitlab.measure import ball_measure

    return ball_measure(MODEL, ZETA, delta)


def build_kac():
    res_c = kac_check(DOUBLING, ZETA, 0.005, 10_000, 0xC301, MODEL)
    res_t = kac_check(TORUS, (0.2, 0.7), 0.02, 10_000, 0xC302, TMODEL)
    body = csv_text(
        ("system", "product", "stderr", "exceeded_fraction"),
        [
            ("doubling", res_c.product, res_c.stderr, res_c.exceeded_fraction),
            ("torus-doubling", res_t.product, res_t.stderr, res_t.exceeded_fraction),
        ],
    )
    return {
        "metrics": {"circle_product": res_c.product, "torus_product": res_t.product},
        "files": {"kac.csv": body},
    }


def build_hts_generic():
    t = np.linspace(0.0, 5.0, 26)
    delta = 5e-4  # mu(U) = 1e-3
    curve = hts_ecdf(DOUBLING, ZETA, delta, t, 10_000, 6000, 0xC4, MODEL)
    sup = float(np.max(np.abs(curve.survival - np.exp(-t))))
    return {
        "metrics": {"sup_dev": sup, "exceeded_fraction": curve.exceeded_fraction},
        "files": {
            "hts.csv": csv_text(
                ("t", "survival", "stderr", "exceeded_fraction"),
                zip(
                    t.tolist(),
                    curve.survival.tolist(),
                    curve.stderr.tolist(),
                    [curve.exceeded_fraction] * t.size,
                ),
            )
        },
    }


def build_gev_and_evl():
    n = m = 10_000
    y_grid = np.linspace(-2.0, 3.0, 21)
    out = {"files": {}, "tables": [], "metrics": {}}

    spec1 = ObservableSpec("g1", ZETA, DOUBLING.space)
    seq1 = LevelSequence(spec1, 1.0, 2.0, 1)
    curve = evl_curve(DOUBLING, spec1, seq1, n, m, y_grid, 0xC501)
    fit1 = gev_fit(curve.stats.maxima, on_infinite="drop")
    out["metrics"]["shape_g1"] = fit1.shape
    out["metrics"]["evl_max_dev"] = float(np.max(np.abs(curve.empirical - curve.analytic)))
    out["metrics"]["infinite_maxima"] = curve.stats.infinite
    out["files"]["evl_curve.csv"] = csv_text(
        ("y", "u_n", "empirical", "analytic", "stderr"),
        zip(
            curve.y.tolist(),
            curve.u.tolist(),
            curve.empirical.tolist(),
            curve.analytic.tolist(),
            curve.stderr.tolist(),
        ),
    )
    for k, u in enumerate(curve.u):
        out["tables"].append(
            ExceedanceCountTable(f"evl-y={curve.y[k]:.2f}", float(u), n, curve.stats.counts[:, k])
        )

    for kind, extra, seed, y0 in (
        ("g2", {"alpha": 2.0}, 0xC502, 1.0),
        ("g3", {"alpha": 2.0, "top": 1.0}, 0xC503, -1.0),
    ):
        spec = ObservableSpec(kind, ZETA, DOUBLING.space, **extra)
        seq = LevelSequence(spec, 1.0, 2.0, 1)
        u0 = level(seq, n, y0)
        stats = block_stats(DOUBLING, spec, n, m, seed, levels=[u0])
        fit = gev_fit(stats.maxima, on_infinite="drop")
        out["metrics"][f"shape_{kind}"] = fit.shape
        out["tables"].append(
            ExceedanceCountTable(f"{kind}-y={y0}", float(u0), n, stats.counts[:, 0])
        )
        out["files"][f"maxima_{kind}.csv"] = csv_text(
            ("block", "maximum"), enumerate(stats.maxima.tolist())
        )
    out["files"]["gev_fits.json"] = json_text(out["metrics"])
    return out


def build_poisson():
    n = m = 10_000
    horizon = 3.0
    spec = ObservableSpec("g1", ZETA, DOUBLING.space)
    seq = LevelSequence(spec, 1.0, 2.0, 1)
    u = level(seq, n, 0.0)
    procs = epp_at_level(DOUBLING, spec, u, m, horizon, 0xC7, MODEL)

    count_res = poisson_count_test(procs, (0.0, 2.0))
    oracle_procs = iid_comparison_processes(m, horizon, procs[0].v, 0xC7F)
    dyn_gaps = pooled_gaps(procs)
    orc_gaps = pooled_gaps(oracle_procs)
    two_sample = float(ks_2samp(dyn_gaps, orc_gaps).statistic)
    band2 = oracles.ks_band_two_sample(dyn_gaps.size, orc_gaps.size, 0.01)

    # long single run: no window bias, plain one-sample band applies
    long_run = epp_at_level(DOUBLING, spec, u, 1, 2000.0, 0xC7E, MODEL)
    ks_long, n_long = interarrival_test(long_run)
    band_long = oracles.ks_band(n_long, 0.01)

    ind = increment_independence_test(procs, (0.0, 1.0), (2.0, 3.0))

    window = IntervalRing.of((0.0, horizon))
    counts = np.array([count_on_ring(p, window) for p in procs], dtype=np.int64)
    table = ExceedanceCountTable("epp-window", float(u), int(procs[0].v * horizon) + 1, counts)

    metrics = {
        "tv_counts": count_res.tv,
        "mean_count": count_res.mean_count,
        "gap_two_sample_ks": two_sample,
        "gap_two_sample_band": band2,
        "ks_long_run": ks_long,
        "ks_long_run_band": band_long,
        "long_run_gaps": n_long,
        "independence_defect": ind.defect,
        "independence_union_defect": ind.union_defect,
    }
    hist = np.bincount(np.array([count_on_ring(p, IntervalRing.of((0.0, 2.0))) for p in procs]))
    files = {
        "poisson_summary.json": json_text(metrics),
        "count_histogram.csv": csv_text(("count", "runs"), enumerate(hist.tolist())),
    }
    return {"metrics": metrics, "files": files, "tables": [table]}


def build_periodic():
    # extremal index at the fixed point, dyadic radius so the run-length
    # chain oracle is exact
    L = 11
    t = np.linspace(0.25, 3.0, 12)
    curve = hts_ecdf(DOUBLING, 0.0, 2.0 ** -L, t, 10_000, 3 * 2 ** (L - 1) + 64, 0xC801, MODEL)
    fit = extremal_index_fit(curve.t, curve.survival)
    oracle_curve = np.array(
        [oracles.hts_survival_at_zero(math.ceil(ti * 2 ** (L - 1)), L) for ti in t]
    )
    curve_dev = float(np.max(np.abs(curve.survival - oracle_curve)))

    n = 8192  # level radius 2^-14, dyadic
    spec0 = ObservableSpec("g1", 0.0, DOUBLING.space)
    seq0 = LevelSequence(spec0, 1.0, 2.0, 1)
    u = level(seq0, n, 0.0)
    budget = 10 ** 7
    table = build_pair_table(DOUBLING, spec0, u, n // 5 + 1, budget=budget, seed=0xC802)
    sums = {k: dprime_sum(table, n, k) for k in (5, 10, 20)}
    oracle_sums = {
        k: n * sum(oracles.pair_prob_at_zero(14, j) for j in range(1, n // k + 1))
        for k in (5, 10, 20)
    }

    # block exceedance counts from the same stationary orbit
    from orbitlab.observables import apply_g
    from orbitlab.dynamics import dist_array
    from orbitlab.orbits import single_orbit_segments

    pos = []
    for j0, pts in single_orbit_segments(DOUBLING, budget, 0xC802):
        vals = apply_g(spec0, dist_array(DOUBLING.space, pts, 0.0))
        pos.append(np.nonzero(vals > u)[0] + j0)
    pos = np.concatenate(pos)
    block_counts = np.bincount(pos // n, minlength=budget // n)[: budget // n]
    count_table = ExceedanceCountTable("dprime-blocks", float(u), n, block_counts)

    rows = [(k, sums[k], iid_baseline(table, n, k), oracle_sums[k]) for k in (5, 10, 20)]
    metrics = {
        "theta_hat": fit.theta,
        "theta_oracle": oracles.theta_at_zero(L, t),
        "curve_dev_vs_oracle": curve_dev,
        **{f"dprime_k{k}": sums[k] for k in (5, 10, 20)},
        **{f"dprime_oracle_k{k}": oracle_sums[k] for k in (5, 10, 20)},
    }
    files = {
        "theta_curve.csv": csv_text(
            ("t", "survival", "oracle"),
            zip(t.tolist(), curve.survival.tolist(), oracle_curve.tolist()),
        ),
        "dprime.csv": csv_text(("k", "sum", "iid_baseline", "oracle"), rows),
    }
    return {"metrics": metrics, "files": files, "tables": [count_table]}


def build_block_length_correspondence():
    delta = 1e-3
    spec = ObservableSpec("g1", ZETA, DOUBLING.space)
    seq = LevelSequence(spec, 1.0, 2.0, 1)
    m = 10_000
    t_values = (0.5, 1.0, 2.0)
    curve = hts_ecdf(DOUBLING, ZETA, delta, t_values, m, 1500, 0xC901, MODEL)
    rows = []
    devs = []
    for i, t in enumerate(t_values):
        ell = block_length_for_radius(seq, delta, t)
        y = -math.log(t)  # tau(y) = t for the log observable
        assert tau(spec, y) == pytest.approx(t, rel=1e-12)
        ec = evl_curve(DOUBLING, spec, seq, ell, m, [y], 0xC902 + i)
        dev = abs(float(ec.empirical[0]) - float(curve.survival[i]))
        devs.append(dev)
        rows.append((t, ell, float(curve.survival[i]), float(ec.empirical[0]), dev))
    return {
        "metrics": {"max_dev": max(devs)},
        "files": {
            "block_length.csv": csv_text(
                ("t", "block_length", "hts_survival", "evl_value", "abs_dev"), rows
            )
        },
    }


def build_expansivity():
    sys_ = MapSystem.perturbed_expanding(0.3)
    rng = child_rng(0xC11A, 0)
    x0 = lebesgue_start(sys_, rng, 1000)
    avgs = birkhoff_log_expansion(sys_, x0, 10_000)
    frac = float(np.mean(avgs >= 0.05))

    quad = MapSystem.quadratic(2.0)
    hist = build_histogram(quad, 10 ** 8, seed=0xC11B, bins=1 << 14, streams=20_000)
    deltas = [0.02, 0.01, 0.005]
    ratios = lebesgue_ratio_curve(hist, 0.0, deltas)
    rel_err = float(abs(ratios[-1] * math.pi - 1.0))

    save_histogram_to = registry_histogram_text(hist)
    files = {
        "expansivity.csv": csv_text(
            ("start", "birkhoff_average"), enumerate(avgs.tolist())
        ),
        "density_ratio.csv": csv_text(
            ("delta", "ratio", "ratio_times_pi"),
            [(d, r, r * math.pi) for d, r in zip(deltas, ratios)],
        ),
        "quadratic_histogram.csv": save_histogram_to,
    }
    return {
        "metrics": {"fraction_above": frac, "density_rel_err": rel_err},
        "files": files,
    }


def registry_histogram_text(hist):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as td:
        p = Path(td) / "h.csv"
        save_histogram(p, hist, meta={"family": "quadratic", "a": 2.0})
        return p.read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_01_max_hit_duality(registry):
    res = _get(registry, "c1", build_duality)
    _report(
        1,
        "max/hit duality",
        res["metrics"]["mismatches"] == 0 and res["metrics"]["samples"] >= 10_000,
        f"{res['metrics']['samples']} samples, {res['metrics']['mismatches']} mismatches",
    )


def test_criterion_02_point_process_identity(registry):
    res = _get(registry, "c2", build_pp_identity)
    _report(
        2,
        "EPP/HTPP identity at matched radius",
        res["metrics"]["mismatched_orbits"] == 0,
        f"{res['metrics']['orbits']} orbits x 1e5 steps, "
        f"{res['metrics']['mismatched_orbits']} mismatching",
    )


def test_criterion_03_kac(registry):
    res = _get(registry, "c3", build_kac)
    ok = (
        abs(res["metrics"]["circle_product"] - 1.0) <= 0.05
        and abs(res["metrics"]["torus_product"] - 1.0) <= 0.05
    )
    _report(
        3,
        "Kac normalisation",
        ok,
        "circle %.4f, torus %.4f" % (res["metrics"]["circle_product"], res["metrics"]["torus_product"]),
    )


def test_criterion_04_exponential_hts(registry):
    res = _get(registry, "c4", build_hts_generic)
    _report(4, "exponential hitting law", res["metrics"]["sup_dev"] <= 0.03,
            "sup dev %.4f <= 0.03" % res["metrics"]["sup_dev"])


def test_criterion_05_gev_shapes(registry):
    res = _get(registry, "c5", build_gev_and_evl)
    mm = res["metrics"]
    ok = (
        abs(mm["shape_g1"]) <= 0.05
        and abs(mm["shape_g2"] - 0.5) <= 0.10
        and abs(mm["shape_g3"] + 0.5) <= 0.10
    )
    _report(5, "classical EVD shapes", ok,
            "g1 %.3f, g2 %.3f, g3 %.3f" % (mm["shape_g1"], mm["shape_g2"], mm["shape_g3"]))


def test_criterion_06_evl_curve(registry):
    res = _get(registry, "c5", build_gev_and_evl)
    _report(6, "EVL curve vs exp(-tau)", res["metrics"]["evl_max_dev"] <= 0.03,
            "max dev %.4f <= 0.03 over 21 levels" % res["metrics"]["evl_max_dev"])


def test_criterion_07_poisson_limit(registry):
    res = _get(registry, "c7", build_poisson)
    mm = res["metrics"]
    ok = (
        mm["tv_counts"] <= 0.03
        and mm["gap_two_sample_ks"] <= mm["gap_two_sample_band"]
        and mm["ks_long_run"] <= mm["ks_long_run_band"]
        and mm["independence_defect"] <= 0.03
    )
    _report(
        7,
        "Poisson limit (counts, gaps, independence)",
        ok,
        "tv %.4f, 2-sample ks %.4f<=%.4f, long-run ks %.4f<=%.4f, defect %.4f"
        % (
            mm["tv_counts"],
            mm["gap_two_sample_ks"],
            mm["gap_two_sample_band"],
            mm["ks_long_run"],
            mm["ks_long_run_band"],
            mm["independence_defect"],
        ),
    )


def test_criterion_08_periodic_centre(registry):
    res = _get(registry, "c8", build_periodic)
    mm = res["metrics"]
    ok = (
        0.4 <= mm["theta_hat"] <= 0.6
        and mm["curve_dev_vs_oracle"] <= 0.03
        and all(mm[f"dprime_k{k}"] >= 1 / 3 for k in (5, 10, 20))
        and all(abs(mm[f"dprime_k{k}"] - mm[f"dprime_oracle_k{k}"]) <= 0.1 for k in (5, 10, 20))
    )
    _report(
        8,
        "periodic-centre deviation",
        ok,
        "theta %.3f (oracle %.3f), dprime %.3f/%.3f/%.3f >= 1/3"
        % (mm["theta_hat"], mm["theta_oracle"], mm["dprime_k5"], mm["dprime_k10"], mm["dprime_k20"]),
    )


def test_criterion_09_block_length_correspondence(registry):
    res = _get(registry, "c9", build_block_length_correspondence)
    _report(9, "hitting/maxima block-length correspondence",
            res["metrics"]["max_dev"] <= 0.04,
            "max |HTS - EVL| %.4f <= 0.04 over t in {0.5, 1, 2}" % res["metrics"]["max_dev"])


def test_criterion_10_bonferroni(registry):
    tables = []
    for name, builder in (("c5", build_gev_and_evl), ("c7", build_poisson), ("c8", build_periodic)):
        tables.extend(_get(registry, name, builder).get("tables", []))
    assert len(tables) >= 20
    violations = [t.label for t in tables if not bonferroni_check(t)["ok"]]
    _report(10, "union-bound sandwich on all count tables", not violations,
            f"{len(tables)} tables, {len(violations)} violations")


def test_criterion_11_expansivity_and_density(registry):
    res = _get(registry, "c11", build_expansivity)
    mm = res["metrics"]
    ok = mm["fraction_above"] >= 0.99 and mm["density_rel_err"] <= 0.02
    _report(
        11,
        "non-uniform expansivity and arcsine density",
        ok,
        "birkhoff>=0.05 on %.1f%% of starts, density rel err %.4f <= 0.02"
        % (100 * mm["fraction_above"], mm["density_rel_err"]),
    )


def test_criterion_12_determinism(registry):
    entries = dict(registry["_entries"])
    assert len(entries) >= 7, "determinism check runs after the other criteria"
    unequal = []
    for name, (builder, first) in entries.items():
        second = builder()
        for fname, text in first["files"].items():
            if second["files"].get(fname) != text:
                unequal.append(f"{name}/{fname}")
    _report(12, "byte-identical reruns", not unequal,
            f"{len(entries)} criteria rebuilt, mismatching files: {unequal or 'none'}")
