"""Monte Carlo sweeps of ranking losses over a schedule of problem sizes.

Each replicate at stage ``p`` draws its own instance from a stream keyed by
``(seed, p, replicate)``; every ranker is scored on that same instance.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .distributions import (
    AbsExp,
    Normal,
    NormalErr,
    Pareto,
    QuarticErr,
    Schedule,
    SuperLight,
    UniformImproper,
    make_stream,
)
from .exceptions import ConfigError, RanklabError
from .losses import PER, HingeDiff, PValue, Ranking, ScalingRule, ZeroOne, additive_loss
from .rankers import (
    FootruleRank,
    PERRank,
    PosteriorMean,
    PValueRank,
    UnitData,
    Value,
    apply_ranker,
)

__all__ = [
    "EMPIRICAL", "ExperimentConfig", "TrialResult", "SweepReport", "SweepRow",
    "generate_instance", "empirical_moments_prior", "misranked_set", "run_sweep",
    "preset_consistent", "preset_counterexample_quartic", "preset_counterexample_superlight",
    "PRESETS", "emit_csv", "load_config", "config_from_dict", "CSV_HEADER",
]

EMPIRICAL = "empirical-moments-normal"
CSV_HEADER = ("p", "ranker", "metric", "mean", "std_error", "replicates", "seed")
VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    true_prior: object
    estimating_prior: Union[object, str]
    error: object
    sigma_law: Schedule
    p_schedule: tuple
    rankers: tuple
    eval_loss: object
    scaling: ScalingRule
    replicates: int
    seed: int
    name: str = "custom"

    def __post_init__(self):
        ps = tuple(int(p) for p in self.p_schedule)
        object.__setattr__(self, "p_schedule", ps)
        object.__setattr__(self, "rankers", tuple(self.rankers))
        if not ps:
            raise ConfigError("p_schedule is empty")
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ConfigError(f"p_schedule must be strictly increasing: {list(ps)}")
        if ps[0] < 2:
            raise ConfigError("every p must be >= 2")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.rankers:
            raise ConfigError("at least one ranker is required")
        names = [r.name for r in self.rankers]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate rankers: {names}")
        if isinstance(self.estimating_prior, str) and self.estimating_prior != EMPIRICAL:
            raise ConfigError(f"unknown estimating prior {self.estimating_prior!r}")


@dataclass(frozen=True)
class TrialResult:
    p: int
    ranker: str
    loss: float
    misranked_pairs: int
    weighted_gap: float
    replicate: int


@dataclass(frozen=True)
class SweepRow:
    """Aggregates for one ``(p, ranker)``; ``scaled_*`` are multiplied by ``s(p)``."""

    p: int
    ranker: str
    loss_mean: float
    loss_se: float
    scaled_pairs_mean: float
    scaled_pairs_se: float
    scaled_gap_mean: float
    scaled_gap_se: float
    replicates: int


@dataclass
class SweepReport:
    config: Optional[ExperimentConfig]
    seed: int
    rows: list = field(default_factory=list)
    trials: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)
    conditions: dict = field(default_factory=dict)

    def row(self, p: int, ranker: str) -> SweepRow:
        for r in self.rows:
            if r.p == p and r.ranker == ranker:
                return r
        raise KeyError((p, ranker))

    def trial_values(self, p: int, ranker: str, attr: str = "loss") -> np.ndarray:
        """Per-replicate values in replicate order."""
        ts = sorted((t for t in self.trials if t.p == p and t.ranker == ranker),
                    key=lambda t: t.replicate)
        return np.array([getattr(t, attr) for t in ts], dtype=float)


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------


def generate_instance(cfg: ExperimentConfig, p: int, rng: np.random.Generator):
    """True values and observed units for one replicate at stage ``p``."""
    if p < 2:
        raise ConfigError("p must be >= 2")
    theta = np.asarray(cfg.true_prior.sample(rng, p), dtype=float)
    sigma = np.asarray(cfg.sigma_law.at(p).sample(rng, p), dtype=float)
    noise = cfg.error.sample_std(rng, p)
    x = np.where(sigma > 0, theta + sigma * noise, theta)
    units = [UnitData(float(x[i]), float(sigma[i]), i) for i in range(p)]
    return theta, units


def empirical_moments_prior(units: Sequence[UnitData]) -> Normal:
    """Normal prior with the sample mean of ``x`` and the sample variance of
    ``x`` less the mean squared error scale (floored at 1e-6)."""
    if len(units) < 2:
        raise ConfigError("empirical prior needs at least 2 units")
    x = np.array([u.x for u in units], dtype=float)
    s = np.array([u.sigma for u in units], dtype=float)
    var = float(np.var(x, ddof=1) - np.mean(s * s))
    return Normal(float(np.mean(x)), max(var, VARIANCE_FLOOR))


def misranked_set(perm: Ranking, theta) -> tuple:
    """``(|M|, sum_{(i,j) in M} theta_j - theta_i)`` over pairs ranked ``i``
    above ``j`` with ``theta_i < theta_j``."""
    if not isinstance(perm, Ranking):
        perm = Ranking(perm)
    theta = np.asarray(theta, dtype=float)
    count, gap = _kernels.ascending_pairs(theta[perm.order()])
    return int(count), float(gap)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _eval_loss(cfg: ExperimentConfig):
    l = cfg.eval_loss
    if isinstance(l, PER) and l.ref_cdf is None and cfg.true_prior.proper:
        return PER(cfg.true_prior.cdf)
    return l


def _replicate(cfg: ExperimentConfig, p: int, rep: int):
    rng = make_stream(cfg.seed, p, rep)
    theta, units = generate_instance(cfg, p, rng)
    prior = empirical_moments_prior(units) if cfg.estimating_prior == EMPIRICAL else cfg.estimating_prior
    loss_fn = _eval_loss(cfg)
    s = cfg.scaling
    out = []
    for k, spec in enumerate(cfg.rankers):
        perm = apply_ranker(spec, units, cfg.error, prior, make_stream(cfg.seed, p, rep, k + 1))
        loss = additive_loss(perm, theta, loss_fn, s)
        count, gap = misranked_set(perm, theta)
        out.append(TrialResult(p, spec.name, loss, count, gap, rep))
    return out


def _task(args):
    cfg, p, rep = args
    try:
        return p, rep, _replicate(cfg, p, rep), None
    except RanklabError as exc:
        return p, rep, None, f"{type(exc).__name__}: {exc}"


def _mean_se(v: np.ndarray):
    n = v.size
    if n == 0:
        return math.nan, math.nan
    return float(v.mean()), (float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0)


def condition_values(cfg: ExperimentConfig) -> dict:
    """``s(p) p^2 E(sigma)^(1/3)`` and ``s(p) p^2 E(sigma^(1/3))`` per stage."""
    out = {}
    for p in cfg.p_schedule:
        law = cfg.sigma_law.at(p)
        f = cfg.scaling.factor(p) * p * p
        mean_sigma = law.moments()[0]
        out[p] = {"power_of_mean": f * mean_sigma ** (1.0 / 3.0),
                  "mean_of_power": f * law.mean_cube_root()}
    return out


def run_sweep(cfg: ExperimentConfig, n_jobs: int = 1) -> SweepReport:
    """Run every (p, replicate) task and aggregate per (p, ranker).

    A replicate whose posterior computation fails is dropped for all
    rankers and counted in ``report.failures``.
    """
    tasks = [(cfg, p, r) for p in cfg.p_schedule for r in range(cfg.replicates)]
    if n_jobs is None or n_jobs <= 0:
        n_jobs = os.cpu_count() or 1
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * n_jobs))))
    else:
        results = [_task(t) for t in tasks]
    report = SweepReport(cfg, cfg.seed, conditions=condition_values(cfg))
    results.sort(key=lambda r: (r[0], r[1]))
    for p, rep, trials, err in results:
        if err is not None:
            report.failures.setdefault(p, []).append((rep, err))
        else:
            report.trials.extend(trials)
    for p in cfg.p_schedule:
        sp = cfg.scaling.factor(p)
        for spec in cfg.rankers:
            loss = report.trial_values(p, spec.name, "loss")
            pairs = report.trial_values(p, spec.name, "misranked_pairs") * sp
            gap = report.trial_values(p, spec.name, "weighted_gap") * sp
            lm, ls = _mean_se(loss)
            pm, ps = _mean_se(pairs)
            gm, gs = _mean_se(gap)
            report.rows.append(SweepRow(p, spec.name, lm, ls, pm, ps, gm, gs, int(loss.size)))
    return report


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

SEED_CONSISTENT = 20251
SEED_QUARTIC = 20252
SEED_SUPERLIGHT = 20253


def preset_consistent(seed: int | None = None, replicates: int = 200) -> ExperimentConfig:
    """Normal truth, empirical normal prior, normal error with sigma = 1/p,
    hinge loss per pair."""
    return ExperimentConfig(
        true_prior=Normal(0.0, 1.0),
        estimating_prior=EMPIRICAL,
        error=NormalErr(),
        sigma_law=Schedule("inv_p"),
        p_schedule=(25, 50, 100, 200, 400),
        rankers=(Value(), PosteriorMean(), PERRank()),
        eval_loss=HingeDiff(),
        scaling=ScalingRule.PER_PAIR,
        replicates=replicates,
        seed=SEED_CONSISTENT if seed is None else seed,
        name="consistent",
    )


def preset_counterexample_quartic(seed: int | None = None, replicates: int = 200) -> ExperimentConfig:
    """Pareto(1, 4) truth, fixed Normal(1.25, 2/9) prior, quartic error, half the
    units exact and the rest with exponential scale of mean p^(-1/2)."""
    return ExperimentConfig(
        true_prior=Pareto(1.0, 4.0),
        estimating_prior=Normal(1.25, 2.0 / 9.0),
        error=QuarticErr(),
        sigma_law=Schedule("zero_exp_inv_sqrt_p"),
        p_schedule=(50, 100, 200, 400, 800),
        rankers=(Value(), PosteriorMean()),
        eval_loss=ZeroOne(),
        scaling=ScalingRule.PER_UNIT,
        replicates=replicates,
        seed=SEED_QUARTIC if seed is None else seed,
        name="quartic",
    )


def preset_counterexample_superlight(seed: int | None = None, replicates: int = 200) -> ExperimentConfig:
    """AbsExp truth, superlight prior, normal error; exponential scale mean
    ``exp(-(log p)^2 / 32)`` on half the units; misranked-pair count."""
    return ExperimentConfig(
        true_prior=AbsExp(),
        estimating_prior=SuperLight(),
        error=NormalErr(),
        sigma_law=Schedule("zero_exp_superlight"),
        p_schedule=(50, 100, 200, 400, 800),
        rankers=(Value(), PosteriorMean()),
        eval_loss=ZeroOne(),
        scaling=ScalingRule.TOTAL,
        replicates=replicates,
        seed=SEED_SUPERLIGHT if seed is None else seed,
        name="superlight",
    )


PRESETS = {
    "consistent": preset_consistent,
    "quartic": preset_counterexample_quartic,
    "superlight": preset_counterexample_superlight,
}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    return format(float(v), ".17g")


def emit_csv(report: SweepReport, path) -> None:
    """One row per (p, ranker, metric), sorted, numbers with 17 significant digits."""
    rows = []
    for r in report.rows:
        for metric, m, se in (("loss", r.loss_mean, r.loss_se),
                              ("scaled_gap", r.scaled_gap_mean, r.scaled_gap_se),
                              ("scaled_pairs", r.scaled_pairs_mean, r.scaled_pairs_se)):
            rows.append((r.p, r.ranker, metric, _fmt(m), _fmt(se), str(r.replicates), str(report.seed)))
    rows.sort(key=lambda t: (t[0], t[1], t[2]))
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in rows:
                w.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV to {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Config files (TOML)
# ---------------------------------------------------------------------------

_TOP_KEYS = {"name", "seed", "replicates", "p_schedule", "scaling", "true_prior",
             "estimating_prior", "error", "sigma_law", "rankers", "eval_loss"}
_REQUIRED = _TOP_KEYS - {"name"}


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing key '{key}' in {where}")
    return d[key]


def _only(d: dict, allowed: set, where: str):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) {extra} in {where}")


def _prior(d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a table")
    kind = _need(d, "kind", where)
    table = {
        "normal": ({"mu", "tau2"}, lambda t: Normal(float(_need(t, "mu", where)), float(_need(t, "tau2", where)))),
        "pareto": ({"theta_min", "alpha"},
                   lambda t: Pareto(float(_need(t, "theta_min", where)), float(_need(t, "alpha", where)))),
        "absexp": (set(), lambda t: AbsExp()),
        "superlight": (set(), lambda t: SuperLight()),
        "uniform": (set(), lambda t: UniformImproper()),
    }
    if kind not in table:
        raise ConfigError(f"unknown prior kind {kind!r} in {where}")
    keys, build = table[kind]
    _only(d, keys | {"kind"}, where)
    return build(d)


def _error(d, where):
    kind = d.get("kind") if isinstance(d, dict) else d
    if isinstance(d, dict):
        _only(d, {"kind"}, where)
    if kind == "normal":
        return NormalErr()
    if kind == "quartic":
        return QuarticErr()
    raise ConfigError(f"unknown error kind {kind!r} in {where}")


def _sigma_law(d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a table")
    _only(d, {"rule", "sigma"}, where)
    rule = _need(d, "rule", where)
    if rule == "constant":
        return Schedule("constant", float(_need(d, "sigma", where)))
    try:
        return Schedule(rule)
    except RanklabError as exc:
        raise ConfigError(str(exc)) from exc


def _ranker(d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a table")
    kind = _need(d, "kind", where)
    prior = _prior(d["prior"], f"{where}.prior") if "prior" in d else None
    if kind == "value":
        _only(d, {"kind"}, where)
        return Value()
    if kind == "pvalue":
        _only(d, {"kind", "theta0"}, where)
        return PValueRank(float(d.get("theta0", 0.0)))
    if kind == "posterior_mean":
        _only(d, {"kind", "prior"}, where)
        return PosteriorMean(prior)
    if kind == "per":
        _only(d, {"kind", "prior"}, where)
        return PERRank(prior)
    if kind == "footrule":
        _only(d, {"kind", "prior", "mc_samples"}, where)
        return FootruleRank(prior, int(d.get("mc_samples", 2000)))
    raise ConfigError(f"unknown ranker kind {kind!r} in {where}")


def _loss(d, where):
    kind = d.get("kind") if isinstance(d, dict) else d
    if isinstance(d, dict):
        _only(d, {"kind", "theta0"}, where)
    if kind == "hinge":
        return HingeDiff()
    if kind == "zero_one":
        return ZeroOne()
    if kind == "per":
        return PER()
    if kind == "pvalue":
        return PValue(float(d.get("theta0", 0.0)) if isinstance(d, dict) else 0.0)
    raise ConfigError(f"unknown loss kind {kind!r} in {where}")


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build a config from a parsed mapping; unknown keys are rejected and
    missing keys are named."""
    _only(d, _TOP_KEYS, "config")
    for key in sorted(_REQUIRED):
        _need(d, key, "config")
    est = d["estimating_prior"]
    est = EMPIRICAL if est == EMPIRICAL else _prior(est, "estimating_prior")
    try:
        scaling = ScalingRule(d["scaling"])
    except ValueError as exc:
        raise ConfigError(f"unknown scaling {d['scaling']!r}; use total, per_unit or per_pair") from exc
    rankers = d["rankers"]
    if not isinstance(rankers, list):
        raise ConfigError("rankers must be an array of tables")
    try:
        return ExperimentConfig(
            true_prior=_prior(d["true_prior"], "true_prior"),
            estimating_prior=est,
            error=_error(d["error"], "error"),
            sigma_law=_sigma_law(d["sigma_law"], "sigma_law"),
            p_schedule=tuple(d["p_schedule"]),
            rankers=tuple(_ranker(r, f"rankers[{i}]") for i, r in enumerate(rankers)),
            eval_loss=_loss(d["eval_loss"], "eval_loss"),
            scaling=scaling,
            replicates=int(d["replicates"]),
            seed=int(d["seed"]),
            name=str(d.get("name", "custom")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return config_from_dict(data)
