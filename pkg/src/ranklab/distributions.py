"""Priors, error models and error-scale laws, with structural condition checks.

Every distribution is an immutable dataclass.  Priors expose ``logpdf``,
``pdf``, ``cdf`` and ``sample``; error models describe the law of
``X - theta`` at scale ``sigma``; sigma laws describe how the per-unit error
scales are drawn at stage ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate, special

from .exceptions import (
    DomainError,
    IntegrationError,
    MomentUndefined,
    ParameterError,
    UnsupportedOperation,
)

__all__ = [
    "Normal", "Pareto", "AbsExp", "SuperLight", "UniformImproper",
    "NormalErr", "QuarticErr",
    "Constant", "ZeroExpMixture", "Schedule", "SCHEDULE_RULES",
    "make_stream", "density", "sample", "moments", "total_mass",
    "check_quasiunimodal", "check_tail_dominating", "estimate_K",
    "QuasiunimodalReport", "TailDominanceReport",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT2_OVER_PI = math.sqrt(2.0) / math.pi

# 8-point Gauss-Legendre on [-1, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def make_stream(seed: int, *stream_id: int) -> np.random.Generator:
    """Independent generator identified by ``(seed, *stream_id)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream_id))
    return np.random.Generator(np.random.PCG64(ss))


class _CdfTable:
    """Cumulative integral of a smooth density on ``[lo, hi]``.

    The cumulative mass at the ``n + 1`` equispaced nodes is computed with
    8-point Gauss-Legendre per interval; evaluation between nodes integrates
    the density exactly over the partial interval with the same rule, so
    the table is accurate to rounding.
    """

    def __init__(self, pdf: Callable[[np.ndarray], np.ndarray], lo: float,
                 hi: float, n: int):
        self.pdf = pdf
        self.lo = float(lo)
        self.hi = float(hi)
        self.n = int(n)
        self.h = (self.hi - self.lo) / self.n
        self.nodes = self.lo + self.h * np.arange(self.n + 1)
        pieces = self._partial(self.nodes[:-1], self.nodes[1:])
        self.cum = np.concatenate([[0.0], np.cumsum(pieces)])

    def _partial(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        pts = mid[..., None] + half[..., None] * _GL_X
        return half * (self.pdf(pts) @ _GL_W)

    def __call__(self, x):
        """Mass on ``[lo, x]`` for ``x`` in ``[lo, hi]``."""
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        k = np.clip(((x - self.lo) // self.h).astype(np.int64), 0, self.n - 1)
        return self.cum[k] + self._partial(self.nodes[k], x)

    def invert(self, q, xtol: float = 1e-10):
        """``x`` with mass ``q`` on ``[lo, x]``.

        The table gives a bracketing interval; inside it a Newton step is
        taken when it stays in the bracket, a bisection step otherwise.
        Stops once every bracket (or Newton step) is below ``xtol``.
        """
        q = np.asarray(q, dtype=float)
        k = np.clip(np.searchsorted(self.cum, q, side="right") - 1, 0, self.n - 1)
        lo = self.nodes[k].copy()
        hi = self.nodes[k + 1].copy()
        span = self.cum[k + 1] - self.cum[k]
        frac = np.where(span > 0, (q - self.cum[k]) / np.where(span > 0, span, 1.0), 0.5)
        x = lo + np.clip(frac, 0.0, 1.0) * (hi - lo)
        act = np.arange(x.size)
        for _ in range(200):
            if act.size == 0:
                break
            xa, la, ha = x[act], lo[act], hi[act]
            f = self(xa) - q[act]
            below = f < 0
            la = np.where(below, xa, la)
            ha = np.where(below, ha, xa)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = xa - f / self.pdf(xa)
            ok = np.isfinite(newton) & (newton > la) & (newton < ha)
            nxt = np.where(ok, newton, 0.5 * (la + ha))
            done = (np.abs(nxt - xa) < xtol) | (ha - la < xtol)
            x[act], lo[act], hi[act] = nxt, la, ha
            act = act[~done]
        return x


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Normal:
    """Normal prior with mean ``mu`` and variance ``tau2``."""

    mu: float = 0.0
    tau2: float = 1.0

    code = 1
    proper = True
    name = "normal"

    def __post_init__(self):
        if not (self.tau2 > 0 and math.isfinite(self.tau2)):
            raise ParameterError(f"Normal prior needs tau2 > 0, got {self.tau2}")

    @property
    def support(self):
        return (-math.inf, math.inf)

    @property
    def scale(self):
        return math.sqrt(self.tau2)

    def kernel_params(self):
        return (float(self.mu), float(self.tau2),
                -0.5 * math.log(2.0 * math.pi * self.tau2))

    def anchors(self):
        return self.mu + self.scale * np.array([0.0, -1, 1, -2, 2, -4, 4, -8, 8])

    def logpdf(self, theta):
        d = np.asarray(theta, dtype=float) - self.mu
        return -0.5 * d * d / self.tau2 - 0.5 * math.log(2.0 * math.pi * self.tau2)

    def pdf(self, theta):
        return np.exp(self.logpdf(theta))

    def cdf(self, theta):
        return special.ndtr((np.asarray(theta, dtype=float) - self.mu) / self.scale)

    def sample(self, rng, n):
        return self.mu + self.scale * rng.standard_normal(n)

    def moments(self):
        return float(self.mu), float(self.tau2)


@dataclass(frozen=True)
class Pareto:
    """Pareto prior: density ``alpha theta_min^alpha / theta^(alpha+1)`` on ``[theta_min, inf)``."""

    theta_min: float = 1.0
    alpha: float = 4.0

    code = 2
    proper = True
    name = "pareto"

    def __post_init__(self):
        if not (self.theta_min > 0 and self.alpha > 0):
            raise ParameterError(
                f"Pareto needs theta_min > 0 and alpha > 0, got ({self.theta_min}, {self.alpha})")

    @property
    def support(self):
        return (float(self.theta_min), math.inf)

    @property
    def scale(self):
        return self.theta_min / self.alpha

    def kernel_params(self):
        return (float(self.theta_min), float(self.alpha),
                math.log(self.alpha) + self.alpha * math.log(self.theta_min))

    def anchors(self):
        return self.theta_min * np.array([1.0, 1.05, 1.2, 1.5, 2, 3, 5, 10])

    def logpdf(self, theta):
        t = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (math.log(self.alpha) + self.alpha * math.log(self.theta_min)
                   - (self.alpha + 1.0) * np.log(np.where(t > 0, t, 1.0)))
        return np.where(t >= self.theta_min, out, -np.inf)

    def pdf(self, theta):
        return np.exp(self.logpdf(theta))

    def cdf(self, theta):
        t = np.asarray(theta, dtype=float)
        safe = np.where(t >= self.theta_min, t, self.theta_min)
        return np.where(t >= self.theta_min, 1.0 - (self.theta_min / safe) ** self.alpha, 0.0)

    def sample(self, rng, n):
        u = rng.random(n)
        return self.theta_min * (1.0 - u) ** (-1.0 / self.alpha)

    def moments(self):
        a, m = self.alpha, self.theta_min
        if a <= 2:
            raise MomentUndefined(f"Pareto variance undefined for alpha={a} <= 2")
        mean = a * m / (a - 1.0)
        var = m * m * a / ((a - 1.0) ** 2 * (a - 2.0))
        return mean, var


@dataclass(frozen=True)
class AbsExp:
    """Prior with density ``|theta| exp(-|theta|) / 2`` (zero at the origin)."""

    code = 3
    proper = True
    name = "absexp"

    @property
    def support(self):
        return (-math.inf, math.inf)

    @property
    def scale(self):
        return 1.0

    def kernel_params(self):
        return (0.0, 0.0, -math.log(2.0))

    def anchors(self):
        return np.array([0.0, -0.5, 0.5, -1, 1, -2, 2, -4, 4, -8, 8, -16, 16])

    def logpdf(self, theta):
        a = np.abs(np.asarray(theta, dtype=float))
        with np.errstate(divide="ignore"):
            return np.log(a) - a - math.log(2.0)

    def pdf(self, theta):
        a = np.abs(np.asarray(theta, dtype=float))
        return 0.5 * a * np.exp(-a)

    def cdf(self, theta):
        t = np.asarray(theta, dtype=float)
        a = np.abs(t)
        half = 0.5 * (1.0 - (1.0 + a) * np.exp(-a))
        return np.where(t >= 0, 0.5 + half, 0.5 - half)

    def sample(self, rng, n):
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return sign * rng.gamma(2.0, 1.0, n)

    def moments(self):
        return 0.0, 6.0


@lru_cache(maxsize=None)
def _superlight_log_norm() -> float:
    z, err = integrate.quad(lambda t: math.exp(-math.exp(0.25 * t * t)), -12.0, 12.0,
                            points=[0.0], epsabs=0.0, epsrel=1e-13, limit=200)
    if not (z > 0 and math.isfinite(z)):
        raise IntegrationError("superlight normalising constant is not finite and positive")
    return math.log(z)


@lru_cache(maxsize=None)
def _superlight_table() -> _CdfTable:
    return _CdfTable(SuperLight().pdf, -6.0, 6.0, 4096)


@dataclass(frozen=True)
class SuperLight:
    """Prior with density proportional to ``exp(-exp(theta^2 / 4))``."""

    code = 4
    proper = True
    name = "superlight"

    @property
    def support(self):
        return (-math.inf, math.inf)

    @property
    def scale(self):
        return 0.5

    @property
    def log_norm_const(self):
        return _superlight_log_norm()

    def kernel_params(self):
        return (0.0, 0.0, -self.log_norm_const)

    def anchors(self):
        return np.array([0.0, -1, 1, -2, 2, -3, 3, -4, 4, -5, 5, -6, 6])

    def logpdf(self, theta):
        q = 0.25 * np.square(np.asarray(theta, dtype=float))
        with np.errstate(over="ignore"):
            return -np.exp(q) - self.log_norm_const

    def pdf(self, theta):
        return np.exp(self.logpdf(theta))

    def cdf(self, theta):
        t = np.asarray(theta, dtype=float)
        return np.where(t <= -6.0, 0.0, np.where(t >= 6.0, 1.0, _superlight_table()(t)))

    def sample(self, rng, n):
        return _superlight_table().invert(rng.random(n))

    def moments(self):
        m2, _ = integrate.quad(lambda t: t * t * math.exp(-math.exp(0.25 * t * t)),
                               -12.0, 12.0, epsabs=0.0, epsrel=1e-12, limit=200)
        return 0.0, m2 / math.exp(self.log_norm_const)


@dataclass(frozen=True)
class UniformImproper:
    """Flat improper prior; the posterior is the normalised likelihood."""

    code = 0
    proper = False
    name = "uniform"

    @property
    def support(self):
        return (-math.inf, math.inf)

    @property
    def scale(self):
        return math.inf

    def kernel_params(self):
        return (0.0, 0.0, 0.0)

    def anchors(self):
        return np.array([])

    def logpdf(self, theta):
        return np.zeros_like(np.asarray(theta, dtype=float))

    def pdf(self, theta):
        return np.ones_like(np.asarray(theta, dtype=float))

    def cdf(self, theta):
        raise UnsupportedOperation("improper uniform prior has no CDF")

    def sample(self, rng, n):
        raise UnsupportedOperation("cannot sample the improper uniform prior")

    def moments(self):
        raise MomentUndefined("improper uniform prior has no moments")


PriorSpec = Union[Normal, Pareto, AbsExp, SuperLight, UniformImproper]


# ---------------------------------------------------------------------------
# Error models (law of X - theta at scale sigma)
# ---------------------------------------------------------------------------


def _check_sigma(sigma):
    s = np.asarray(sigma, dtype=float)
    if np.any(~(s > 0)):
        raise ParameterError(f"error scale must be positive, got {sigma}")
    return s


@dataclass(frozen=True)
class NormalErr:
    """``X = theta + sigma Z`` with ``Z`` standard normal."""

    code = 0
    name = "normal"
    symmetric = True

    @staticmethod
    def log_const(sigma):
        return -math.log(sigma) - _LOG_SQRT_2PI

    def logpdf(self, r, sigma):
        s = _check_sigma(sigma)
        z = np.asarray(r, dtype=float) / s
        return -0.5 * z * z - np.log(s) - _LOG_SQRT_2PI

    def pdf(self, r, sigma):
        return np.exp(self.logpdf(r, sigma))

    def std_pdf(self, z):
        return np.exp(-0.5 * np.square(z) - _LOG_SQRT_2PI)

    def cdf(self, r, sigma):
        return special.ndtr(np.asarray(r, dtype=float) / _check_sigma(sigma))

    def logsf(self, r, sigma):
        return special.log_ndtr(-np.asarray(r, dtype=float) / _check_sigma(sigma))

    def sample_std(self, rng, n):
        return rng.standard_normal(n)


_QUARTIC_UMAX = 64.0
_QUARTIC_NODES = 4096


def _quartic_std_pdf(u):
    u2 = np.square(u)
    return _SQRT2_OVER_PI / (1.0 + u2 * u2)


def _quartic_tail(u):
    """Mass beyond ``u`` for ``u >= _QUARTIC_UMAX`` (asymptotic series in 1/u^4)."""
    u = np.asarray(u, dtype=float)
    u3 = u ** 3
    v = 1.0 / (u * u * u * u)
    return _SQRT2_OVER_PI / u3 * (1.0 / 3.0 - v / 7.0 + v * v / 11.0)


@lru_cache(maxsize=None)
def _quartic_table() -> _CdfTable:
    return _CdfTable(_quartic_std_pdf, 0.0, _QUARTIC_UMAX, _QUARTIC_NODES)


@dataclass(frozen=True)
class QuarticErr:
    """Error density ``sqrt(2) / (pi sigma (1 + (r / sigma)^4))``; mean 0, variance sigma^2."""

    code = 1
    name = "quartic"
    symmetric = True

    @staticmethod
    def log_const(sigma):
        return math.log(_SQRT2_OVER_PI) - math.log(sigma)

    def logpdf(self, r, sigma):
        s = _check_sigma(sigma)
        z2 = np.square(np.asarray(r, dtype=float) / s)
        return math.log(_SQRT2_OVER_PI) - np.log(s) - np.log1p(z2 * z2)

    def pdf(self, r, sigma):
        return np.exp(self.logpdf(r, sigma))

    def std_pdf(self, z):
        return _quartic_std_pdf(np.asarray(z, dtype=float))

    def _upper(self, u):
        """Mass above ``u >= 0`` of the standardised law."""
        tab = _quartic_table()
        # remaining table mass plus the analytic tail beyond the table
        inside = (tab.cum[-1] - tab(np.minimum(u, _QUARTIC_UMAX))) + _quartic_tail(_QUARTIC_UMAX)
        return np.where(u > _QUARTIC_UMAX, _quartic_tail(np.maximum(u, _QUARTIC_UMAX)), inside)

    def std_cdf(self, z):
        z = np.asarray(z, dtype=float)
        up = self._upper(np.abs(z))
        return np.where(z >= 0, 1.0 - up, up)

    def cdf(self, r, sigma):
        return self.std_cdf(np.asarray(r, dtype=float) / _check_sigma(sigma))

    def logsf(self, r, sigma):
        z = np.asarray(r, dtype=float) / _check_sigma(sigma)
        up = self._upper(np.abs(z))
        with np.errstate(divide="ignore"):
            return np.where(z >= 0, np.log(up), np.log1p(-up))

    def sample_std(self, rng, n):
        q = rng.random(n)
        upper = np.abs(q - 0.5)  # mass between 0 and |u|
        sign = np.where(q >= 0.5, 1.0, -1.0)
        tab = _quartic_table()
        in_table = upper < tab.cum[-1]
        out = np.empty(n)
        out[in_table] = tab.invert(upper[in_table])
        # beyond the table: solve tail(u) = 1/2 - upper by Newton on 1/u^3
        tail_mass = 0.5 - upper[~in_table]
        if tail_mass.size:
            u = np.maximum((_SQRT2_OVER_PI / (3.0 * np.maximum(tail_mass, 1e-300))) ** (1.0 / 3.0),
                           _QUARTIC_UMAX)
            for _ in range(8):
                f = _quartic_tail(u) - tail_mass
                u = np.maximum(u + f / _quartic_std_pdf(u), _QUARTIC_UMAX)
            out[~in_table] = u
        return sign * out


ErrorModel = Union[NormalErr, QuarticErr]


# ---------------------------------------------------------------------------
# Error-scale laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    """Every unit has the same error scale."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ParameterError(f"Constant sigma must be >= 0, got {self.sigma}")

    def sample(self, rng, n):
        return np.full(n, float(self.sigma))

    def moments(self):
        return float(self.sigma), 0.0

    def mean_cube_root(self):
        return self.sigma ** (1.0 / 3.0)


@dataclass(frozen=True)
class ZeroExpMixture:
    """Zero with probability 1/2, otherwise exponential with mean ``v``."""

    v: float

    def __post_init__(self):
        if not (self.v > 0 and math.isfinite(self.v)):
            raise ParameterError(f"ZeroExpMixture needs v > 0, got {self.v}")

    def sample(self, rng, n):
        zero = rng.random(n) < 0.5
        draws = rng.exponential(self.v, n)
        return np.where(zero, 0.0, draws)

    def moments(self):
        return 0.5 * self.v, 0.75 * self.v * self.v

    def mean_cube_root(self):
        """E(sigma^(1/3))."""
        return 0.5 * math.gamma(4.0 / 3.0) * self.v ** (1.0 / 3.0)


SCHEDULE_RULES: dict[str, Callable[[int], object]] = {
    "inv_p": lambda p: Constant(1.0 / p),
    "inv_sqrt_p": lambda p: Constant(p ** -0.5),
    "zero": lambda p: Constant(0.0),
    "zero_exp_inv_sqrt_p": lambda p: ZeroExpMixture(p ** -0.5),
    "zero_exp_superlight": lambda p: ZeroExpMixture(math.exp(-math.log(p) ** 2 / 32.0)),
}


@dataclass(frozen=True)
class Schedule:
    """Named rule producing a sigma law for each stage ``p``."""

    rule: str
    sigma: float | None = field(default=None)

    def __post_init__(self):
        if self.rule == "constant":
            if self.sigma is None:
                raise ParameterError("constant schedule needs sigma")
        elif self.rule not in SCHEDULE_RULES:
            raise ParameterError(
                f"unknown sigma schedule {self.rule!r}; known: constant, {', '.join(SCHEDULE_RULES)}")

    def at(self, p: int):
        if self.rule == "constant":
            return Constant(float(self.sigma))
        return SCHEDULE_RULES[self.rule](int(p))


# ---------------------------------------------------------------------------
# Generic operations
# ---------------------------------------------------------------------------


def _is_error(spec) -> bool:
    return isinstance(spec, (NormalErr, QuarticErr))


def density(spec, point, sigma=None):
    """Density of a prior at ``point``, or of an error model at residual ``point``."""
    if _is_error(spec):
        if sigma is None:
            raise ParameterError("error-model density needs sigma")
        return spec.pdf(point, sigma)
    out = spec.pdf(point)
    return float(out) if np.ndim(out) == 0 else out


def sample(spec, rng: np.random.Generator, n: int, sigma: float = 1.0):
    """``n`` i.i.d. draws; error models are drawn at scale ``sigma``."""
    if _is_error(spec):
        _check_sigma(sigma)
        return sigma * spec.sample_std(rng, n)
    return spec.sample(rng, n)


def moments(spec, sigma: float = 1.0):
    """(mean, variance); closed form where available, else quadrature."""
    if isinstance(spec, NormalErr):
        return 0.0, float(sigma) ** 2
    if isinstance(spec, QuarticErr):
        m2 = 2.0 * integrate.quad(lambda u: u * u * float(_quartic_std_pdf(u)), 0.0, math.inf,
                                  epsabs=0.0, epsrel=1e-12, limit=200)[0]
        return 0.0, m2 * float(sigma) ** 2
    return spec.moments()


def total_mass(spec) -> float:
    """Integral of a proper density over its support by adaptive quadrature."""
    if _is_error(spec):
        f = lambda u: float(spec.std_pdf(u))  # noqa: E731
        return (integrate.quad(f, -math.inf, 0.0, epsabs=0.0, epsrel=1e-12, limit=200)[0]
                + integrate.quad(f, 0.0, math.inf, epsabs=0.0, epsrel=1e-12, limit=200)[0])
    if not spec.proper:
        raise UnsupportedOperation("improper prior has infinite mass")
    f = lambda t: float(spec.pdf(t))  # noqa: E731
    if isinstance(spec, SuperLight):
        return integrate.quad(f, -12.0, 12.0, points=[0.0], epsabs=0.0, epsrel=1e-12, limit=200)[0]
    lo, hi = spec.support
    if math.isfinite(lo):
        return integrate.quad(f, lo, math.inf, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    return (integrate.quad(f, -math.inf, 0.0, epsabs=0.0, epsrel=1e-12, limit=200)[0]
            + integrate.quad(f, 0.0, math.inf, epsabs=0.0, epsrel=1e-12, limit=200)[0])


# ---------------------------------------------------------------------------
# Structural condition checks (diagnostics on caller-supplied grids)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuasiunimodalReport:
    holds: bool
    epsilon_hat: float
    quasimode: float

    def __iter__(self):
        return iter((self.holds, self.epsilon_hat))


def check_quasiunimodal(spec, grid: Sequence[float]) -> QuasiunimodalReport:
    """Best grid quasimode and its epsilon.

    For a candidate mode ``m`` the admissible epsilon is the smallest ratio
    ``pi(x1) / pi(x2)`` over grid pairs with ``x2 <= x1 <= m`` or
    ``m <= x1 <= x2``.  Prefix/suffix maxima make this O(n) per candidate
    set rather than a pair scan.
    """
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 3:
        raise DomainError("grid needs at least 3 points")
    if np.any(np.diff(g) < 0):
        raise DomainError("grid must be sorted")
    lo, hi = spec.support
    if g[0] < lo or g[-1] > hi:
        raise DomainError(f"grid [{g[0]}, {g[-1]}] leaves the support [{lo}, {hi}]")
    d = np.asarray(spec.pdf(g), dtype=float)

    def ratios(dens, running_max):
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(running_max > 0, dens / running_max, 1.0)
        return r

    left = ratios(d, np.maximum.accumulate(d))
    right = ratios(d, np.maximum.accumulate(d[::-1])[::-1])
    left_min = np.minimum.accumulate(left)
    right_min = np.minimum.accumulate(right[::-1])[::-1]
    eps = np.minimum(left_min, right_min)
    k = int(np.argmax(eps))
    return QuasiunimodalReport(bool(eps[k] > 0), float(eps[k]), float(g[k]))


@dataclass(frozen=True)
class TailDominanceReport:
    """Outcome of the tail-dominance scan.

    ``s_by_r`` maps each swept ``r`` to the smallest ``s`` making the bound
    hold on the grid; ``worst_ratio`` is that ``s`` at the best ``r``.
    ``witnesses`` lists ``(a, x, sigma, ratio)`` at the best ``r``.
    """

    worst_ratio: float
    best_r: float
    s_by_r: dict
    witnesses: list
    feasible: bool


def _excess_second_moment(error, b: float) -> float:
    """E(((U)^2 - b^2)_+) for the standardised error law U."""
    f = lambda u: (u * u - b * b) * float(error.std_pdf(u))  # noqa: E731
    val, _ = integrate.quad(f, b, math.inf, epsabs=0.0, epsrel=1e-10, limit=400)
    val *= 2.0
    if not math.isfinite(val):
        raise IntegrationError(f"excess second moment diverged at b={b}")
    return max(val, 0.0)


def check_tail_dominating(prior, error, a_grid, x_grid, sigma_grid,
                          r_values=(0.25, 0.5, 1.0, 2.0, 4.0)) -> TailDominanceReport:
    """Search for constants ``(r, s)`` with
    ``E(((theta_L - x)^2 - a^2)_+) < s sigma a prior(r a / sigma)`` on the grid.

    ``theta_L`` is the flat-prior posterior, so the left side depends on
    ``(a, sigma)`` only; pairs with ``x <= a`` are skipped.  Ratios are formed
    in log space, so an underflowing prior density yields an infinite ratio.
    """
    if not prior.proper:
        raise IntegrationError("tail dominance needs a proper prior")
    a_grid = np.asarray(a_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    sigma_grid = np.asarray(sigma_grid, dtype=float)
    for name, arr in (("a", a_grid), ("x", x_grid), ("sigma", sigma_grid)):
        if arr.size == 0 or np.any(~np.isfinite(arr)) or np.any(arr <= 0):
            raise DomainError(f"{name} grid must be positive and finite")
    lhs_cache = {}
    cases = []
    for sigma in sigma_grid:
        for a in a_grid:
            key = (float(a), float(sigma))
            if key not in lhs_cache:
                lhs_cache[key] = sigma * sigma * _excess_second_moment(error, a / sigma)
            for x in x_grid:
                if x > a:
                    cases.append((float(a), float(x), float(sigma), lhs_cache[key]))
    if not cases:
        raise DomainError("no grid pairs with x > a")
    s_by_r = {}
    per_r = {}
    for r in r_values:
        logs = []
        for a, x, sigma, lhs in cases:
            lp = float(prior.logpdf(r * a / sigma))
            if lhs <= 0.0:
                logs.append(-math.inf)
            elif lp == -math.inf:
                logs.append(math.inf)
            else:
                logs.append(math.log(lhs) - math.log(sigma * a) - lp)
        logs = np.array(logs)
        per_r[r] = logs
        worst = float(np.max(logs))
        s_by_r[float(r)] = math.exp(worst) if worst < 709.0 else math.inf
    best_r = min(s_by_r, key=lambda r: (s_by_r[r], r))
    logs = per_r[best_r]
    witnesses = [
        (a, x, sigma, math.exp(lr) if lr < 709.0 else math.inf)
        for (a, x, sigma, _), lr in zip(cases, logs)
    ]
    worst_ratio = s_by_r[best_r]
    return TailDominanceReport(worst_ratio, best_r, s_by_r, witnesses,
                               bool(math.isfinite(worst_ratio)))


def estimate_K(error, x_grid, sigma_grid) -> float:
    """Smallest K with ``int (K sigma^2 - (theta - x)^2) L(x; theta, sigma) dtheta > 0``
    on the grid, i.e. the largest flat-prior posterior variance ratio.

    The boundary value is returned; any larger K satisfies the strict
    inequality.
    """
    worst = 0.0
    for sigma in np.asarray(sigma_grid, dtype=float):
        _check_sigma(sigma)
        for x in np.asarray(x_grid, dtype=float):
            lik = lambda t: float(error.pdf(x - t, sigma))  # noqa: E731
            mom = lambda t: (t - x) ** 2 * float(error.pdf(x - t, sigma))  # noqa: E731
            m0 = sum(integrate.quad(lik, lo, hi, epsabs=0.0, epsrel=1e-11, limit=400)[0]
                     for lo, hi in ((-math.inf, x), (x, math.inf)))
            m2 = sum(integrate.quad(mom, lo, hi, epsabs=0.0, epsrel=1e-11, limit=400)[0]
                     for lo, hi in ((-math.inf, x), (x, math.inf)))
            if not (m0 > 0 and math.isfinite(m2)):
                raise IntegrationError(f"likelihood integral failed at x={x}, sigma={sigma}")
            worst = max(worst, m2 / (m0 * sigma * sigma))
    return worst
