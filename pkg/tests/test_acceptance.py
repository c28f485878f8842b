"""Acceptance suite: ten end-to-end criteria at their stated tolerances.

Each test prints one ``ACCEPTANCE <n> PASS|FAIL`` line with its headline
numbers before asserting.  The three preset sweeps run once per module and
are shared between the trend, direction and determinism criteria.
"""

import math
import time

import numpy as np
import pytest

from ranklab import checks, harness
from ranklab.oracle import compare_with_posterior_mean

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def _report(n, title, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, f"criterion {n} ({title}) failed: {detail}"
    return _report


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_01_conjugate_agreement(report):
    rep, dt = _timed(checks.check_conjugate, seed=0, n=1000)
    m = rep.metrics
    ok = m["max_abs_mean_error"] < 1e-8 and m["max_rel_variance_error"] < 1e-8 and dt < 10
    report(1, "conjugate agreement", ok,
           f"max |mean err| {m['max_abs_mean_error']:.2e}, max rel var err "
           f"{m['max_rel_variance_error']:.2e}, {dt:.1f}s")


def test_02_footrule_sandwich(report):
    rep, dt = _timed(checks.check_sandwich, seed=0, n=100_000, max_p=64)
    m = rep.metrics
    ok = m["violations"] == 0 and dt < 30
    report(2, "footrule sandwich", ok,
           f"{m['instances']} instances, {m['violations']} violations "
           f"({m['refinement_violations']} for inversions <= footrule), {dt:.1f}s")


def test_03_four_reals_inequality(report):
    rep, dt = _timed(checks.check_inequality, seed=0, n=1_000_000)
    m = rep.metrics
    ok = m["violations"] == 0 and m["max_magnitude"] >= 1e7 and dt < 10
    report(3, "four-reals inequality", ok,
           f"{m['quadruples']} quadruples up to |v| = {m['max_magnitude']:.3g}, "
           f"{m['violations']} violations, {dt:.1f}s")


def test_04_superlight_mean_bound(report):
    rep = checks.check_pmbound43()
    m = rep.metrics
    ok = m["failures"] == 0 and m["tested"] > 0
    report(4, "superlight posterior-mean bound", ok, f"{m['tested']} cases, {m['failures']} failures")


def test_05_quartic_mean_bound(report):
    rep = checks.check_pmbound41()
    m = rep.metrics
    ok = m["failures"] == 0 and m["tested"] > 0
    report(5, "quartic posterior-mean bound", ok,
           f"{m['tested']} cases, {m['skipped']} skipped by precondition, {m['failures']} failures")


def test_06_small_sigma_ratios(report):
    rep = checks.check_lemma24(bound=10.0)
    m = rep.metrics
    ok = m["max_mean_ratio"] < 10 and m["max_variance_ratio"] < 10
    report(6, "small-sigma mean/variance ratios", ok,
           f"max mean ratio {m['max_mean_ratio']:.4g}, max variance ratio {m['max_variance_ratio']:.4g}")


def test_07_posterior_mean_vs_oracle(report):
    parts, ok = [], True
    for p in (3, 4, 5, 6):
        res = compare_with_posterior_mean(p, 100, seed=0)
        good = res.agreement_rate >= 0.99 and res.gaps_within
        ok &= good
        parts.append(f"p={p}: {res.agreement_rate:.2f} agree, worst gap {res.max_gap_in_se:.2f} SE")
    report(7, "posterior mean vs exhaustive oracle", ok, "; ".join(parts))


# ---------------------------------------------------------------------------
# Preset sweeps (shared)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def sweeps(tmp_path_factory):
    out = tmp_path_factory.mktemp("presets")
    res = {}
    for name, make in harness.PRESETS.items():
        cfg = make()
        rep, dt = _timed(harness.run_sweep, cfg)
        path = out / f"{name}.csv"
        harness.emit_csv(rep, path)
        res[name] = (cfg, rep, dt, path)
    return res


def _seq(rep, cfg, ranker, attr):
    return [getattr(rep.row(p, ranker), attr) for p in cfg.p_schedule]


def test_08_consistency_trend(report, sweeps):
    cfg, rep, dt, _ = sweeps["consistent"]
    parts, ok = [], dt < 600 and not rep.failures
    for ranker in ("value", "posterior_mean", "per"):
        m = _seq(rep, cfg, ranker, "loss_mean")
        se = _seq(rep, cfg, ranker, "loss_se")
        drop = m[-1] < 0.25 * m[0]
        steps = all(m[k + 1] <= m[k] + 2 * math.hypot(se[k], se[k + 1]) for k in range(len(m) - 1))
        ok &= drop and steps
        parts.append(f"{ranker} {m[0]:.3g} -> {m[-1]:.3g} (x{m[0] / m[-1]:.0f})")
    report(8, "consistency trend", ok, "; ".join(parts) + f"; {dt:.0f}s")


@pytest.mark.parametrize("name", ["quartic", "superlight"])
def test_09_inconsistency_direction(report, sweeps, name):
    cfg, rep, dt, _ = sweeps[name]
    pm = _seq(rep, cfg, "posterior_mean", "loss_mean")
    # per-pair misranking of value ranking on the same replicates
    pairs = [rep.trial_values(p, "value", "misranked_pairs").mean() / (p * p) for p in cfg.p_schedule]
    no_decay = pm[-1] >= 0.5 * pm[0]
    value_drop = pairs[0] / pairs[-1]
    ok = no_decay and value_drop >= 2.0 and dt < 900 and not rep.failures
    report(9, f"inconsistency direction ({name})", ok,
           f"posterior-mean loss {pm[0]:.4g} -> {pm[-1]:.4g}; value per-pair "
           f"{pairs[0]:.4g} -> {pairs[-1]:.4g} (drop x{value_drop:.2f}); {dt:.0f}s")


def test_10_determinism(report, sweeps, tmp_path):
    parts, ok = [], True
    for name, (cfg, _, _, path) in sweeps.items():
        again = harness.run_sweep(harness.PRESETS[name]())
        harness.emit_csv(again, tmp_path / f"{name}.csv")
        same = (tmp_path / f"{name}.csv").read_bytes() == path.read_bytes()
        ok &= same
        parts.append(f"{name} {'identical' if same else 'DIFFERS'}")
    report(10, "byte-identical preset CSV on rerun", ok, "; ".join(parts))
