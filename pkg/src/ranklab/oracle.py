"""Monte Carlo expected losses and exhaustive Bayes-optimal permutation search.

Candidate permutations are compared on one shared matrix of posterior
draws (common random numbers), so the argmin is taken over paired
estimates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import Normal, NormalErr, make_stream
from .exceptions import ParameterError, ShapeError, SizeLimitError
from .losses import PER, HingeDiff, Ranking, ScalingRule
from .posterior import PosteriorGrid, posterior, posterior_sample

__all__ = [
    "LossEstimate", "draw_joint", "per_draw_losses", "expected_loss_mc",
    "bayes_optimal_bruteforce", "paired_gap", "MAX_BRUTEFORCE_P",
    "OracleComparison", "compare_with_posterior_mean",
]

MAX_BRUTEFORCE_P = 8


@dataclass(frozen=True)
class LossEstimate:
    mean: float
    std_error: float
    n: int


def draw_joint(posteriors: Sequence[PosteriorGrid], n: int,
               rng: np.random.Generator) -> np.ndarray:
    """``(n, p)`` independent posterior draws, Latin-hypercube per unit."""
    return np.column_stack([posterior_sample(g, rng, n, stratified=True) for g in posteriors])


def per_draw_losses(order: np.ndarray, draws: np.ndarray, l,
                    s: ScalingRule = ScalingRule.TOTAL) -> np.ndarray:
    """Additive loss of the ranking (top-first unit ``order``) on each draw."""
    t = draws[:, order]
    n, p = t.shape
    if isinstance(l, PER) and l.ref_cdf is None:
        # empirical CDF of each draw: within-row rank / p
        t = (np.argsort(np.argsort(t, axis=1, kind="stable"), axis=1) + 1.0) / p
        l = _hinge
    out = np.zeros(n)
    for a in range(p - 1):
        out += np.sum(l(t[:, a:a + 1], t[:, a + 1:]), axis=1)
    return s.factor(p) * out


def _hinge(x, y):
    return np.maximum(y - x, 0.0)


def _estimate(samples: np.ndarray) -> LossEstimate:
    n = samples.size
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return LossEstimate(mean, se, n)


def expected_loss_mc(perm: Ranking, posteriors: Sequence[PosteriorGrid], l,
                     s: ScalingRule, n: int, rng: np.random.Generator) -> LossEstimate:
    """Posterior expected additive loss of ``perm`` with its standard error."""
    if n < 100:
        raise ParameterError(f"n must be >= 100, got {n}")
    if not isinstance(perm, Ranking):
        perm = Ranking(perm)
    if perm.p != len(posteriors):
        raise ShapeError(f"ranking has {perm.p} units but {len(posteriors)} posteriors given")
    draws = draw_joint(posteriors, n, rng)
    return _estimate(per_draw_losses(perm.order(), draws, l, s))


def _pair_means(draws, l):
    """``M[i, j]`` = mean loss when ``i`` is ranked above ``j``."""
    p = draws.shape[1]
    M = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            if i != j:
                M[i, j] = float(np.mean(l(draws[:, i], draws[:, j])))
    return M


def bayes_optimal_bruteforce(posteriors: Sequence[PosteriorGrid], l, s: ScalingRule,
                             n: int, rng: np.random.Generator | None = None,
                             draws: np.ndarray | None = None):
    """Permutation minimising the Monte Carlo posterior expected loss.

    All ``p!`` rankings are scored on the same draws; the first minimiser in
    lexicographic order of top-first unit lists wins.  Returns
    ``(Ranking, LossEstimate)``.
    """
    p = len(posteriors)
    if p > MAX_BRUTEFORCE_P:
        raise SizeLimitError(f"exhaustive search is capped at p <= {MAX_BRUTEFORCE_P}, got {p}")
    if p < 1:
        raise ParameterError("need at least one posterior")
    if draws is None:
        if n < 100:
            raise ParameterError(f"n must be >= 100, got {n}")
        draws = draw_joint(posteriors, n, rng)
    if isinstance(l, PER) and l.ref_cdf is None:
        raise ParameterError("bruteforce search needs a fixed PER reference CDF")
    M = _pair_means(draws, l)
    orders = np.array(list(itertools.permutations(range(p))), dtype=np.int64).reshape(-1, p)
    totals = np.zeros(orders.shape[0])
    for a in range(p - 1):
        for b in range(a + 1, p):
            totals += M[orders[:, a], orders[:, b]]
    best = int(np.argmin(totals))
    order = orders[best]
    est = _estimate(per_draw_losses(order, draws, l, s))
    return Ranking.from_order(order), est


def paired_gap(perm_a: Ranking, perm_b: Ranking, draws: np.ndarray, l,
               s: ScalingRule = ScalingRule.TOTAL):
    """Loss of ``perm_a`` minus loss of ``perm_b`` on shared draws.

    Returns ``(gap, paired_se, combined_se)`` where ``combined_se`` is
    ``sqrt(se_a^2 + se_b^2)`` from the two marginal estimates.
    """
    la = per_draw_losses(perm_a.order(), draws, l, s)
    lb = per_draw_losses(perm_b.order(), draws, l, s)
    d = la - lb
    n = d.size
    paired = float(d.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    ea, eb = _estimate(la), _estimate(lb)
    return float(d.mean()), paired, math.hypot(ea.std_error, eb.std_error)


@dataclass(frozen=True)
class OracleComparison:
    """Outcome of checking sort-by-posterior-mean against exhaustive search.

    ``rows`` holds ``(instance, agree, gap, combined_se)`` per instance, where
    ``gap`` is the posterior-mean ranking's loss minus the oracle's.
    """

    p: int
    instances: int
    agreements: int
    max_gap_in_se: float
    rows: tuple

    @property
    def agreement_rate(self) -> float:
        return self.agreements / self.instances if self.instances else 1.0

    @property
    def gaps_within(self) -> bool:
        """Every disagreement is within 3 combined standard errors."""
        return self.max_gap_in_se <= 3.0


def compare_with_posterior_mean(p: int, instances: int, seed: int,
                                n_draws: int = 4000, sigma_range=(0.3, 1.5)) -> OracleComparison:
    """Random Normal(0, 1) / NormalErr instances scored under HingeDiff.

    Instance ``k`` uses stream ``(seed, p, k)``: true values from the prior,
    noise scales uniform on ``sigma_range``.
    """
    if instances < 1:
        raise ParameterError(f"instances must be >= 1, got {instances}")
    prior, err, loss = Normal(0.0, 1.0), NormalErr(), HingeDiff()
    agree = 0
    worst = 0.0
    rows = []
    for k in range(instances):
        rng = make_stream(seed, p, k)
        theta = prior.sample(rng, p)
        sig = rng.uniform(sigma_range[0], sigma_range[1], p)
        x = theta + sig * rng.standard_normal(p)
        posts = [posterior(prior, err, float(xi), float(si)) for xi, si in zip(x, sig)]
        draws = draw_joint(posts, n_draws, rng)
        best, _ = bayes_optimal_bruteforce(posts, loss, ScalingRule.TOTAL, n_draws, draws=draws)
        means = np.array([g.mean for g in posts])
        pm = Ranking.from_order(np.lexsort((np.arange(p), -means)))
        same = pm == best
        gap, _, se = paired_gap(pm, best, draws, loss)
        if same:
            agree += 1
        else:
            worst = max(worst, abs(gap) / se if se > 0 else math.inf)
        rows.append((k, same, gap, se))
    return OracleComparison(p, instances, agree, worst, tuple(rows))
