"""Ranking estimators: value, p-value, posterior mean, posterior expected rank
and footrule (r-value) ranking.

Every ranker returns a ``Ranking`` and breaks ties by unit id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .distributions import Normal, NormalErr, UniformImproper, make_stream
from .exceptions import ParameterError
from .losses import Ranking
from .posterior import (
    gaussian_less_prob,
    pairwise_less_prob,
    posterior,
    posterior_moments,
    posterior_sample,
)

__all__ = [
    "UnitData", "Value", "PValueRank", "PosteriorMean", "PERRank", "FootruleRank",
    "rank_value", "rank_pvalue", "rank_posterior_mean", "rank_per", "rank_footrule",
    "apply_ranker", "expected_ranks",
]


@dataclass(frozen=True)
class UnitData:
    x: float
    sigma: float
    id: int

    def __post_init__(self):
        if not (self.sigma >= 0):
            raise ParameterError(f"unit {self.id}: sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class Value:
    name = "value"


@dataclass(frozen=True)
class PValueRank:
    theta0: float = 0.0
    name = "pvalue"


@dataclass(frozen=True)
class PosteriorMean:
    prior: Optional[object] = None
    name = "posterior_mean"


@dataclass(frozen=True)
class PERRank:
    prior: Optional[object] = None
    name = "per"


@dataclass(frozen=True)
class FootruleRank:
    prior: Optional[object] = None
    mc_samples: int = 2000
    name = "footrule"

    def __post_init__(self):
        if self.mc_samples < 1000:
            raise ParameterError(f"footrule ranking needs mc_samples >= 1000, got {self.mc_samples}")


def _arrays(units: Sequence[UnitData]):
    x = np.array([u.x for u in units], dtype=float)
    s = np.array([u.sigma for u in units], dtype=float)
    ids = np.array([u.id for u in units])
    return x, s, ids


def _rank_by(score_desc, ids) -> Ranking:
    """Position 1 to the largest score; ties by id, then input position."""
    order = np.lexsort((np.arange(ids.size), ids, -np.asarray(score_desc, dtype=float)))
    return Ranking.from_order(order)


def rank_value(units: Sequence[UnitData]) -> Ranking:
    x, _, ids = _arrays(units)
    return _rank_by(x, ids)


def rank_pvalue(units: Sequence[UnitData], theta0: float, error) -> Ranking:
    """Ascending one-sided p-value ``P(X >= x | theta0, sigma)``.

    Units with ``sigma = 0`` get p-value 0, 1 or 1/2 as ``x`` is above,
    below or at ``theta0``.  Sorting uses log p-values so extreme tails keep
    their order.
    """
    x, s, ids = _arrays(units)
    logp = np.empty_like(x)
    zero = s == 0
    pos = ~zero
    if np.any(pos):
        logp[pos] = error.logsf(x[pos] - theta0, s[pos])
    logp[zero & (x > theta0)] = -math.inf
    logp[zero & (x < theta0)] = 0.0
    logp[zero & (x == theta0)] = math.log(0.5)
    return _rank_by(-logp, ids)


def rank_posterior_mean(units: Sequence[UnitData], prior, error) -> Ranking:
    x, s, ids = _arrays(units)
    mean, _ = posterior_moments(prior, error, x, s)
    return _rank_by(mean, ids)


def _gaussian_posteriors(prior, error) -> bool:
    return isinstance(error, NormalErr) and isinstance(prior, (Normal, UniformImproper))


def expected_ranks(units: Sequence[UnitData], prior, error) -> np.ndarray:
    """``r_i = sum_{j != i} P(theta_i < theta_j)``: expected number of units above ``i``."""
    x, s, _ = _arrays(units)
    p = x.size
    if _gaussian_posteriors(prior, error):
        m, v = posterior_moments(prior, error, x, s)
        P = gaussian_less_prob(m[:, None], v[:, None], m[None, :], v[None, :])
    else:
        grids = [posterior(prior, error, xi, si) for xi, si in zip(x, s)]
        P = np.full((p, p), 0.5)
        for i in range(p):
            for j in range(i + 1, p):
                q = pairwise_less_prob(grids[i], grids[j])
                P[i, j] = q
                P[j, i] = 1.0 - q
    np.fill_diagonal(P, 0.0)
    return P.sum(axis=1)


def rank_per(units: Sequence[UnitData], prior, error) -> Ranking:
    """Ascending posterior expected rank."""
    _, _, ids = _arrays(units)
    return _rank_by(-expected_ranks(units, prior, error), ids)


def rank_footrule(units: Sequence[UnitData], prior, error, mc_samples: int = 2000,
                  rng: np.random.Generator | None = None) -> Ranking:
    """Bayes ranking for the footrule loss.

    The posterior distribution of each unit's position is estimated from
    joint posterior draws; the ranking minimising the expected footrule
    ``sum_i E|k_i - tau(i)|`` is then an exact linear assignment.
    """
    if mc_samples < 1000:
        raise ParameterError(f"mc_samples must be >= 1000, got {mc_samples}")
    x, s, ids = _arrays(units)
    p = x.size
    if np.all(s == 0) or p < 2:
        return rank_value(units)
    rng = make_stream(0) if rng is None else rng
    draws = np.empty((p, mc_samples))
    for i in range(p):
        draws[i] = posterior_sample(posterior(prior, error, x[i], s[i]), rng, mc_samples)
    # position of each unit within each draw (descending, ties by input order)
    order = np.argsort(-draws, axis=0, kind="stable")
    pos = np.empty_like(order)
    np.put_along_axis(pos, order, np.arange(p)[:, None], axis=0)
    counts = np.zeros((p, p))
    for i in range(p):
        counts[i] = np.bincount(pos[i], minlength=p)
    probs = counts / mc_samples
    k = np.arange(p)
    cost = probs @ np.abs(k[:, None] - k[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(p, dtype=np.int64)
    perm[rows] = cols + 1
    return Ranking(perm)


def apply_ranker(spec, units: Sequence[UnitData], error, default_prior=None,
                 rng: np.random.Generator | None = None) -> Ranking:
    """Dispatch on the ranker spec; priors left as ``None`` use ``default_prior``."""
    if isinstance(spec, Value):
        return rank_value(units)
    if isinstance(spec, PValueRank):
        return rank_pvalue(units, spec.theta0, error)
    prior = getattr(spec, "prior", None) or default_prior
    if prior is None:
        raise ParameterError(f"{spec.name} ranking needs a prior")
    if isinstance(spec, PosteriorMean):
        return rank_posterior_mean(units, prior, error)
    if isinstance(spec, PERRank):
        return rank_per(units, prior, error)
    if isinstance(spec, FootruleRank):
        return rank_footrule(units, prior, error, spec.mc_samples, rng)
    raise ParameterError(f"unknown ranker spec {spec!r}")
