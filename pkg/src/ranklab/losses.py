"""Pairwise misranking losses, additive loss assembly and permutation metrics.

A ranking ``rho`` assigns position ``rho[i]`` (1 = top) to unit ``i``.  The
additive loss of ``rho`` is ``s(p) * sum l(theta_i, theta_j)`` over pairs
with ``rho(i) < rho(j)``; a pairwise generator is zero unless the unit
placed higher has the smaller value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .exceptions import ParameterError, ShapeError

__all__ = [
    "Ranking", "HingeDiff", "ZeroOne", "PER", "PValue", "ScalingRule",
    "RestrainedConstants", "additive_loss", "footrule_loss", "inversion_loss",
    "true_ranking", "sandwich_check", "restrained_probe", "RestrainedReport",
    "inequality_check_3reals", "pairwise_expected_loss_bounds", "LossBounds",
]


class Ranking:
    """A permutation of ``{1..p}``; ``perm[i]`` is the position of unit ``i``."""

    __slots__ = ("_perm",)

    def __init__(self, perm: Sequence[int]):
        arr = np.asarray(perm)
        if arr.ndim != 1:
            raise ShapeError("ranking must be one-dimensional")
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.round(arr)):
                raise ParameterError("ranking positions must be integers")
        arr = arr.astype(np.int64)
        p = arr.size
        if p and (arr.min() != 1 or arr.max() != p
                  or not np.all(np.bincount(arr - 1, minlength=p) == 1)):
            raise ParameterError(f"not a permutation of 1..{p}: {arr.tolist()}")
        arr.setflags(write=False)
        self._perm = arr

    @classmethod
    def from_order(cls, order: Sequence[int]) -> "Ranking":
        """Build from unit indices listed top first (0-based)."""
        order = np.asarray(order, dtype=np.int64)
        p = order.size
        if p and (order.min() != 0 or order.max() != p - 1
                  or not np.all(np.bincount(order, minlength=p) == 1)):
            raise ParameterError(f"not an ordering of 0..{p - 1}: {order.tolist()}")
        perm = np.empty_like(order)
        perm[order] = np.arange(1, p + 1)
        return cls._trusted(perm)

    @classmethod
    def _trusted(cls, perm: np.ndarray) -> "Ranking":
        obj = cls.__new__(cls)
        perm.setflags(write=False)
        obj._perm = perm
        return obj

    @classmethod
    def identity(cls, p: int) -> "Ranking":
        return cls(np.arange(1, p + 1))

    @property
    def perm(self) -> np.ndarray:
        return self._perm

    @property
    def p(self) -> int:
        return int(self._perm.size)

    def order(self) -> np.ndarray:
        """Unit indices from top to bottom."""
        return np.argsort(self._perm, kind="stable")

    def __len__(self):
        return self.p

    def __eq__(self, other):
        return isinstance(other, Ranking) and np.array_equal(self._perm, other._perm)

    def __hash__(self):
        return hash(tuple(self._perm.tolist()))

    def __repr__(self):
        return f"Ranking({self._perm.tolist()})"


# ---------------------------------------------------------------------------
# Pairwise generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RestrainedConstants:
    """Constants of a restrained pairwise loss: Lipschitz ``lam``, near-diagonal
    lower bound ``l(x, y) > b (y - x)`` for ``y - x < a``, diagonal jump ``D``."""

    lam: float
    a: float
    b: float
    D: float


@dataclass(frozen=True)
class HingeDiff:
    """``l(x, y) = (y - x)_+``."""

    name = "hinge"
    constants = RestrainedConstants(lam=1.0, a=math.inf, b=1.0, D=0.0)

    def __call__(self, x, y):
        return np.maximum(np.asarray(y, dtype=float) - np.asarray(x, dtype=float), 0.0)


@dataclass(frozen=True)
class ZeroOne:
    """``l(x, y) = 1`` if ``x < y`` else 0."""

    name = "zero_one"
    constants = RestrainedConstants(lam=0.0, a=1.0, b=1.0, D=1.0)

    def __call__(self, x, y):
        return (np.asarray(x, dtype=float) < np.asarray(y, dtype=float)).astype(float)


@dataclass(frozen=True)
class PER:
    """``l(x, y) = F(y) - F(x)`` for ``x < y``.

    ``ref_cdf`` is a vectorised CDF; ``None`` means the empirical CDF of the
    values being scored (resolved in ``additive_loss``).
    """

    ref_cdf: Optional[Callable] = None
    name = "per"

    def with_cdf(self, cdf: Callable) -> "PER":
        return PER(cdf)

    def __call__(self, x, y):
        if self.ref_cdf is None:
            raise ParameterError("PER loss needs a reference CDF; use additive_loss for the empirical default")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = np.abs(np.asarray(self.ref_cdf(y), dtype=float) - np.asarray(self.ref_cdf(x), dtype=float))
        return np.where(x < y, d, 0.0)


@dataclass(frozen=True)
class PValue:
    """Loss 1 when the pair straddles the null value ``theta0`` in the wrong order."""

    theta0: float = 0.0
    name = "pvalue"

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        t = self.theta0
        hit = ((x < t) & (y >= t)) | ((x <= t) & (y > t))
        return hit.astype(float)


class ScalingRule(enum.Enum):
    TOTAL = "total"
    PER_UNIT = "per_unit"
    PER_PAIR = "per_pair"

    def factor(self, p: int) -> float:
        if p < 1:
            raise ParameterError(f"p must be >= 1, got {p}")
        if self is ScalingRule.TOTAL:
            return 1.0
        if self is ScalingRule.PER_UNIT:
            return 1.0 / p
        return 1.0 / (p * p)


def _empirical_cdf(values: np.ndarray) -> Callable:
    srt = np.sort(values)
    n = srt.size

    def cdf(t):
        return np.searchsorted(srt, np.asarray(t, dtype=float), side="right") / n

    return cdf


def _check(perm, theta):
    if not isinstance(perm, Ranking):
        perm = Ranking(perm)
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.size != perm.p:
        raise ShapeError(f"ranking has {perm.p} units but theta has shape {theta.shape}")
    return perm, theta


def additive_loss(perm, theta, l, s: ScalingRule = ScalingRule.TOTAL) -> float:
    """``s(p) * sum_{rho(i) < rho(j)} l(theta_i, theta_j)``."""
    perm, theta = _check(perm, theta)
    p = perm.p
    if p < 2:
        return 0.0
    t = theta[perm.order()]
    if isinstance(l, ZeroOne):
        total = float(_kernels.ascending_pairs(t)[0])
    elif isinstance(l, HingeDiff):
        total = float(_kernels.ascending_pairs(t)[1])
    elif isinstance(l, PER):
        cdf = l.ref_cdf if l.ref_cdf is not None else _empirical_cdf(theta)
        # F is nondecreasing, so pairs with F(x) < F(y) are exactly the ones
        # carrying loss and the sum is the ascending-pair gap of F(t)
        total = float(_kernels.ascending_pairs(np.asarray(cdf(t), dtype=float))[1])
    else:
        iu = np.triu_indices(p, 1)
        total = float(np.sum(l(t[iu[0]], t[iu[1]])))
    return s.factor(p) * total


def true_ranking(theta) -> Ranking:
    """Descending order of ``theta``, ties broken by unit index."""
    theta = np.asarray(theta, dtype=float)
    order = np.lexsort((np.arange(theta.size), -theta))
    return Ranking.from_order(order)


def footrule_loss(perm, theta) -> int:
    """``sum_i |rho(i) - tau(i)|`` against the true descending ranking ``tau``."""
    perm, theta = _check(perm, theta)
    tau = true_ranking(theta).perm
    return int(np.abs(perm.perm - tau).sum())


def inversion_loss(perm, theta) -> int:
    """Number of pairs ranked ``i`` before ``j`` with ``theta_i < theta_j``."""
    perm, theta = _check(perm, theta)
    return int(_kernels.ascending_pairs(theta[perm.order()])[0])


def sandwich_check(perm, theta) -> bool:
    """``inv / 2 <= footrule <= 2 inv`` for distinct ``theta``."""
    L = inversion_loss(perm, theta)
    R = footrule_loss(perm, theta)
    return 0.5 * L <= R <= 2 * L


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RestrainedReport:
    lambda_hat: float
    D_hat: float
    a_b_witness: list
    violations: dict
    restrained: bool


def restrained_probe(l, domain_box=(-5.0, 5.0), n_samples: int = 20000,
                     rng: np.random.Generator | None = None,
                     a_values=(0.01, 0.1, 1.0)) -> RestrainedReport:
    """Randomised estimate of the restrained-loss constants of ``l``.

    Only violations are conclusive: finite differences give a lower
    estimate of the Lipschitz constant and the sampled ``b`` an upper
    estimate of the admissible lower-bound slope.
    """
    lo, hi = map(float, domain_box)
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise ParameterError("domain box must be finite with hi > lo")
    rng = np.random.default_rng(0) if rng is None else rng
    width = hi - lo
    n = int(n_samples)
    u = np.sort(rng.uniform(lo, hi, (n, 2)), axis=1)
    x, y = u[:, 0], u[:, 1]
    keep = y > x
    x, y = x[keep], y[keep]

    # Lipschitz on {x < y}: coordinate finite differences staying inside the set
    h = 1e-6 * width
    inside = (y - x) > 2 * h
    xi, yi = x[inside], y[inside]
    base = l(xi, yi)
    dx = np.abs(l(xi + h, yi) - base) / h
    dy = np.abs(l(xi, yi + h) - base) / h
    lam = float(max(dx.max(initial=0.0), dy.max(initial=0.0)))

    # monotonicity: increasing in y, decreasing in x
    step = rng.uniform(0.0, 0.1 * width, x.size)
    mono_y = int(np.sum(l(x, y + step) < l(x, y) - 1e-12))
    mono_x = int(np.sum(l(x - step, y) < l(x, y) - 1e-12))

    # diagonal jump: sup of l(x, x + eps) - lam * eps
    eps = np.exp(rng.uniform(math.log(1e-9 * width), math.log(width), n))
    xs = rng.uniform(lo, hi, n)
    D = float(max(0.0, np.max(l(xs, xs + eps) - lam * eps)))

    # near-diagonal lower bound l(x, y) > b (y - x) on y - x < a
    witnesses = []
    bad_a = 0
    for a in a_values:
        gap = rng.uniform(0.0, a, n)
        gap = gap[gap > 0]
        xa = rng.uniform(lo, hi, gap.size)
        b_hat = float(np.min(l(xa, xa + gap) / gap))
        witnesses.append((float(a), b_hat))
        if not b_hat > 0:
            bad_a += 1
    violations = {"monotone_y": mono_y, "monotone_x": mono_x,
                  "lower_bound": bad_a, "lipschitz": int(not math.isfinite(lam))}
    restrained = (mono_x == 0 and mono_y == 0 and bad_a < len(a_values)
                  and math.isfinite(lam) and any(b > 0 for _, b in witnesses))
    return RestrainedReport(lam, D, witnesses, violations, bool(restrained))


def inequality_check_3reals(x, y, z, w):
    """``|x-y|/(|x|+|y|+2) - |z-w|/(|z|+|w|+2) <= d (1 + d/2) / 2``,
    with ``d = |x-z| + |y-w|``.  Vectorised; returns a bool or bool array.
    """
    x, y, z, w = (np.asarray(v, dtype=float) for v in (x, y, z, w))
    lhs = np.abs(x - y) / (np.abs(x) + np.abs(y) + 2.0) - np.abs(z - w) / (np.abs(z) + np.abs(w) + 2.0)
    d = np.abs(x - z) + np.abs(y - w)
    ok = lhs <= 0.5 * d * (1.0 + 0.5 * d)
    return bool(ok) if ok.ndim == 0 else ok


@dataclass(frozen=True)
class LossBounds:
    """Pairwise expected-loss envelopes; ``nan`` where a bound does not apply."""

    upper_i: float
    upper_ii: float
    lower_iii: float

    @property
    def lower_applicable(self) -> bool:
        return not math.isnan(self.lower_iii)

    def __iter__(self):
        return iter((self.upper_i, self.upper_ii, self.lower_iii))


def pairwise_expected_loss_bounds(constants, mu1, mu2, s1, s2) -> LossBounds:
    """Bounds on ``E l(X1, X2)`` (upper) and ``E l(X2, X1)`` (lower) for
    independent ``X1, X2`` with means ``mu1, mu2`` and sds ``s1, s2``.

    ``constants`` is a ``RestrainedConstants`` or a loss carrying one.
    (i) needs ``mu1 > mu2``; the lower bound needs
    ``mu1 - mu2 > 2 sqrt(2 lam S / b)`` with ``S = s1^2 + s2^2``.
    """
    c = getattr(constants, "constants", constants)
    if not isinstance(c, RestrainedConstants):
        raise ParameterError("restrained constants (lam, a, b, D) are required")
    S = float(s1) ** 2 + float(s2) ** 2
    gap = float(mu1) - float(mu2)
    if gap > 0:
        up_i = c.D * min(S / gap ** 2, 1.0) + 3.0 * c.lam * S / gap
    else:
        up_i = math.nan
    up_ii = c.D + 4.0 * c.lam * max(-gap, 0.0) + (2.0 + 2.0 * math.sqrt(2.0)) * c.lam * math.sqrt(S)
    if c.b > 0 and gap > 0 and gap > 2.0 * math.sqrt(2.0 * c.lam * S / c.b):
        low = 0.5 * c.b ** 3 / (c.b + c.lam) ** 2 * min(gap, c.a)
    else:
        low = math.nan
    return LossBounds(up_i, up_ii, low)
