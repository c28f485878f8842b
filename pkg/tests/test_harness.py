import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ranklab.distributions import (
    AbsExp, Constant, Normal, NormalErr, Pareto, QuarticErr, Schedule, SuperLight, make_stream,
)
from ranklab.exceptions import ConfigError
from ranklab.harness import (
    CSV_HEADER, EMPIRICAL, ExperimentConfig, SweepReport, condition_values, config_from_dict, emit_csv,
    empirical_moments_prior, generate_instance, load_config, misranked_set,
    preset_consistent, preset_counterexample_quartic, preset_counterexample_superlight, run_sweep,
)
from ranklab.losses import HingeDiff, Ranking, ScalingRule, ZeroOne
from ranklab.rankers import PERRank, PosteriorMean, UnitData, Value

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "consistent_small.toml"


def small_cfg(**kw):
    base = dict(true_prior=Normal(0, 1), estimating_prior=EMPIRICAL, error=NormalErr(),
                sigma_law=Schedule("constant", 0.5), p_schedule=(6, 12), rankers=(Value(), PosteriorMean()),
                eval_loss=HingeDiff(), scaling=ScalingRule.PER_PAIR, replicates=8, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_invariants():
    with pytest.raises(ConfigError):
        small_cfg(p_schedule=(10, 10))
    with pytest.raises(ConfigError):
        small_cfg(replicates=0)


def test_zero_sigma_instances_are_exact():
    cfg = small_cfg(sigma_law=Schedule("zero"))
    theta, units = generate_instance(cfg, 20, make_stream(0))
    assert [u.x for u in units] == theta.tolist()


def test_pareto_truth_support():
    cfg = small_cfg(true_prior=Pareto(1, 4))
    theta, _ = generate_instance(cfg, 500, make_stream(1))
    assert theta.min() >= 1.0


def test_quartic_preset_half_units_exact():
    cfg = preset_counterexample_quartic()
    n_zero = 0
    reps = 40
    for k in range(reps):
        _, units = generate_instance(cfg, 100, make_stream(2, k))
        n_zero += sum(u.sigma == 0 for u in units)
    n = 100 * reps
    assert abs(n_zero - n / 2) < 3 * math.sqrt(n / 4)


def test_empirical_prior_pareto_limit():
    rng = make_stream(3)
    x = Pareto(1, 4).sample(rng, 10 ** 5)
    prior = empirical_moments_prior([UnitData(float(v), 0.0, i) for i, v in enumerate(x)])
    n = x.size
    assert abs(prior.mu - 4 / 3) < 3 * math.sqrt(2 / 9 / n)
    se_var = np.std((x - x.mean()) ** 2) / math.sqrt(n)
    assert abs(prior.tau2 - 2 / 9) < 3 * se_var


def test_empirical_prior_floor_and_correction():
    p = empirical_moments_prior([UnitData(1.0, 0.0, 0), UnitData(1.0, 0.0, 1)])
    assert p.tau2 == 1e-6
    rng = make_stream(4)
    theta = rng.standard_normal(2000)
    s = rng.uniform(0.5, 1.0, 2000)
    x = theta + s * rng.standard_normal(2000)
    prior = empirical_moments_prior([UnitData(a, b, i) for i, (a, b) in enumerate(zip(x, s))])
    assert prior.tau2 < np.var(x, ddof=1)
    assert prior.tau2 == pytest.approx(np.var(x, ddof=1) - np.mean(s * s))


def test_misranked_set_examples():
    assert misranked_set(Ranking([3, 2, 1]), [1, 2, 3]) == (0, 0.0)
    assert misranked_set(Ranking([1, 2]), [1, 2]) == (1, 1.0)


@given(st.integers(2, 30).flatmap(lambda p: st.tuples(
    st.permutations(list(range(1, p + 1))),
    st.lists(st.floats(-100, 100), min_size=p, max_size=p))))
@settings(max_examples=100, deadline=None)
def test_misranked_set_matches_double_loop(data):
    perm, theta = data
    theta = np.array(theta)
    cnt, gap = 0, 0.0
    for i in range(len(perm)):
        for j in range(len(perm)):
            if perm[i] < perm[j] and theta[i] < theta[j]:
                cnt += 1
                gap += theta[j] - theta[i]
    c, g = misranked_set(Ranking(perm), theta)
    assert c == cnt
    assert c <= len(perm) * (len(perm) - 1) // 2
    assert g == pytest.approx(gap, rel=1e-9, abs=1e-9)


def test_zero_sigma_sweep_has_zero_loss():
    rep = run_sweep(small_cfg(sigma_law=Schedule("zero"), rankers=(Value(), PosteriorMean(), PERRank())))
    assert all(r.loss_mean == 0.0 and r.scaled_pairs_mean == 0.0 for r in rep.rows)


def test_hinge_loss_bounded_by_weighted_gap():
    rep = run_sweep(small_cfg())
    for t in rep.trials:
        s = ScalingRule.PER_PAIR.factor(t.p)
        assert t.loss >= 0
        assert t.loss <= 1.0 * t.weighted_gap * s + 0.0 * t.misranked_pairs * s + 1e-12
    assert all(r.loss_se >= 0 for r in rep.rows)


def test_sweep_is_deterministic_and_order_free(tmp_path):
    cfg = small_cfg()
    a, b = run_sweep(cfg), run_sweep(cfg, n_jobs=2)
    emit_csv(a, tmp_path / "a.csv")
    emit_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_doubling_replicates_shrinks_se():
    r1 = run_sweep(small_cfg(replicates=100, p_schedule=(8,), rankers=(Value(),)))
    r2 = run_sweep(small_cfg(replicates=200, p_schedule=(8,), rankers=(Value(),), seed=4))
    ratio = r2.rows[0].loss_se / r1.rows[0].loss_se
    assert ratio == pytest.approx(1 / math.sqrt(2), rel=0.3)


def test_value_ranking_chebyshev_envelope():
    rng = make_stream(5)
    hits, env = [], []
    for _ in range(300):
        theta = rng.standard_normal(10)
        s = rng.uniform(0.2, 1.0, 10)
        x = theta + s * rng.standard_normal(10)
        for i in range(10):
            for j in range(10):
                if theta[i] > theta[j]:
                    hits.append(float(x[i] < x[j]))
                    env.append(min(1.0, (s[i] ** 2 + s[j] ** 2) / (theta[i] - theta[j]) ** 2))
    hits = np.array(hits)
    assert hits.mean() <= np.mean(env) + 3 * hits.std() / math.sqrt(hits.size)


def test_emit_csv_format(tmp_path):
    emit_csv(SweepReport(None, 1), tmp_path / "empty.csv")
    assert (tmp_path / "empty.csv").read_text() == ",".join(CSV_HEADER) + "\n"
    cfg = small_cfg(replicates=3)
    rep = run_sweep(cfg)
    emit_csv(rep, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "p,ranker,metric,mean,std_error,replicates,seed"
    assert len(lines) - 1 == len(cfg.p_schedule) * len(cfg.rankers) * 3
    keys = [tuple(l.split(",")[:3]) for l in lines[1:]]
    assert keys == sorted(keys, key=lambda k: (int(k[0]), k[1], k[2]))


def test_presets_match_documented_constants():
    c = preset_consistent()
    assert c.p_schedule == (25, 50, 100, 200, 400) and c.replicates == 200
    assert c.scaling is ScalingRule.PER_PAIR and c.estimating_prior == EMPIRICAL
    assert [r.name for r in c.rankers] == ["value", "posterior_mean", "per"]
    q = preset_counterexample_quartic()
    assert q.estimating_prior == Normal(1.25, 2 / 9) and isinstance(q.error, QuarticErr)
    assert q.scaling is ScalingRule.PER_UNIT and isinstance(q.eval_loss, ZeroOne)
    s = preset_counterexample_superlight()
    assert isinstance(s.true_prior, AbsExp) and isinstance(s.estimating_prior, SuperLight)
    assert s.scaling is ScalingRule.TOTAL and s.p_schedule == (50, 100, 200, 400, 800)


def test_consistent_condition_decays():
    cond = condition_values(preset_consistent())
    for p, v in cond.items():
        assert v["power_of_mean"] == pytest.approx(p ** (-1 / 3))
        assert v["mean_of_power"] == pytest.approx(p ** (-1 / 3))


def test_load_config_file():
    cfg = load_config(CONFIG)
    assert cfg.name == "consistent_small"
    assert cfg.p_schedule == (10, 20, 40)
    assert cfg.sigma_law.at(10) == Constant(0.1)


def _raw():
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(CONFIG.read_text())


def test_config_missing_key_named():
    d = _raw()
    del d["replicates"]
    with pytest.raises(ConfigError, match="replicates"):
        config_from_dict(d)


@pytest.mark.parametrize("path,key", [((), "colour"), (("true_prior",), "sd"), (("error",), "df")])
def test_config_unknown_keys_rejected(path, key):
    d = _raw()
    target = d
    for p in path:
        target = target[p]
    target[key] = 1
    with pytest.raises(ConfigError, match=key):
        config_from_dict(d)


def test_config_unknown_kinds_rejected():
    d = _raw()
    d["rankers"].append({"kind": "magic"})
    with pytest.raises(ConfigError, match="magic"):
        config_from_dict(d)
