"""Per-unit posteriors by adaptive quadrature, with conjugate shortcuts.

The unnormalised posterior ``prior(theta) * L(x; theta, sigma)`` is
integrated by adaptive Simpson in the compiled kernel.  Normal errors are
integrated directly in ``theta`` on a window that is doubled until its
boundary density is negligible.  Quartic errors have polynomial tails that
defeat truncation: the bulk is integrated in ``theta`` and the two tails in
``u = arctan((theta - x) / sigma)`` out to the poles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import _kernels
from .distributions import NormalErr, QuarticErr, UniformImproper, Normal
from .exceptions import DegeneratePosteriorError, ParameterError

__all__ = [
    "PosteriorGrid",
    "posterior",
    "likelihood_posterior",
    "conjugate_normal_posterior",
    "pairwise_less_prob",
    "posterior_sample",
    "posterior_moments",
]

_HALF_PI = 0.5 * math.pi - 1e-10
_MAX_DOUBLINGS = 12


@dataclass(frozen=True, eq=False)
class PosteriorGrid:
    """Discretised normalised posterior.

    ``sum(weights * values) == 1``.  A point mass is a single node with
    weight and value 1.  ``cdf_nodes`` holds the posterior CDF at each node.
    """

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    mean: float
    variance: float
    log_norm_const: float
    cdf_nodes: np.ndarray = field(repr=False)

    @property
    def is_point_mass(self) -> bool:
        return self.nodes.size == 1

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_point_mass:
            return np.where(t >= self.nodes[0], 1.0, 0.0)
        return np.interp(t, self.nodes, self.cdf_nodes, left=0.0, right=1.0)

    def translated(self, delta: float) -> "PosteriorGrid":
        return PosteriorGrid(self.nodes + delta, self.weights, self.values,
                             self.mean + delta, self.variance, self.log_norm_const,
                             self.cdf_nodes)


def _point_mass(x: float, log_norm_const: float = 0.0) -> PosteriorGrid:
    one = np.ones(1)
    return PosteriorGrid(np.array([float(x)]), one, one.copy(), float(x), 0.0,
                         log_norm_const, one.copy())


def conjugate_normal_posterior(mu: float, tau2: float, x: float, sigma: float):
    """Closed-form posterior (mean, variance) for a normal prior and normal error."""
    if not tau2 > 0 or not sigma > 0:
        raise ParameterError("conjugate posterior needs tau2 > 0 and sigma > 0")
    s2 = sigma * sigma
    prec = 1.0 / tau2 + 1.0 / s2
    return (x / s2 + mu / tau2) / prec, 1.0 / prec


class _Target:
    """Scalar log posterior through the kernel, plus mode/width search."""

    def __init__(self, prior, error, x, sigma):
        self.prior = prior
        self.error = error
        self.x = float(x)
        self.sigma = float(sigma)
        self.code = prior.code
        self.pa, self.pb, self.pc = prior.kernel_params()
        self.ecode = error.code
        self.ec = error.log_const(sigma)
        lo, hi = prior.support
        self.lo, self.hi = float(lo), float(hi)

    def __call__(self, theta: float) -> float:
        return _kernels.log_post(self.code, self.pa, self.pb, self.pc, self.ecode,
                                 self.ec, self.x, self.sigma, float(theta))

    def mode(self):
        x, s = self.x, self.sigma
        if isinstance(self.prior, UniformImproper):
            return x, self(x)
        cand = [x + s * np.linspace(-16.0, 16.0, 129), self.prior.anchors()]
        pts = np.concatenate(cand)
        pts = pts[(pts >= self.lo) & (pts <= self.hi)]
        if math.isfinite(self.lo):
            pts = np.append(pts, self.lo)
        span = np.linspace(pts.min(), pts.max(), 257)
        pts = np.unique(np.concatenate([pts, span]))
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            vals = self.prior.logpdf(pts) + self.error.logpdf(x - pts, s)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        k = int(np.argmax(vals))
        if not np.isfinite(vals[k]):
            raise DegeneratePosteriorError(
                f"posterior has no mass near x={x} (sigma={s}) under {self.prior.name} prior")
        a = pts[max(k - 1, 0)]
        b = pts[min(k + 1, pts.size - 1)]
        if b > a:
            res = optimize.minimize_scalar(lambda t: -self(t), bounds=(a, b), method="bounded",
                                           options={"xatol": 1e-12 * max(1.0, abs(pts[k])) + 1e-14})
            if -res.fun >= vals[k]:
                return float(res.x), float(-res.fun)
        return float(pts[k]), float(vals[k])

    def half_width(self, mode, top, direction):
        """Distance from the mode at which the log density has dropped by 1."""
        base = min(self.sigma, self.prior.scale) if math.isfinite(self.prior.scale) else self.sigma
        d = base * 1e-3
        edge = self.hi if direction > 0 else self.lo
        limit = abs(edge - mode) if math.isfinite(edge) else math.inf
        while d < 1e8 * base:
            if d >= limit:
                return limit if limit > 0 else None
            if self(mode + direction * d) < top - 1.0:
                break
            d *= 2.0
        else:
            return None
        lo, hi = 0.5 * d, d
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if self(mode + direction * mid) < top - 1.0:
                hi = mid
            else:
                lo = mid
        return hi


def _breaks(tg: _Target, mode: float, width: float, window=None):
    x, s = tg.x, tg.sigma
    pts = [x + s * np.array([0.0, -1, 1, -2, 2, -4, 4, -8, 8]),
           tg.prior.anchors(),
           mode + width * np.array([0.0, -1, 1, -2, 2, -4, 4, -8, 8, -16, 16])]
    pts = np.concatenate(pts)
    if window is not None:
        pts = np.concatenate([pts, window])
        pts = pts[(pts >= window[0]) & (pts <= window[1])]
    pts = pts[(pts >= tg.lo) & (pts <= tg.hi)]
    return pts


def _run(tg, mapped, breaks, shift, center, scale, tol, collect, ref_floor=None):
    return _kernels.integrate(tg.code, tg.pa, tg.pb, tg.pc, tg.ecode, tg.ec, tg.x, tg.sigma,
                              mapped, breaks, shift, center, scale, tol, collect, ref_floor)


_TAIL_STEPS = np.array([16.0, 32.0, 64.0, 256.0, 1e3, 1e4, 1e6, 1e8])


def _join(pieces, collect):
    """Sum integrals of consecutive pieces and splice their node grids."""
    i0 = sum(p[0] for p in pieces)
    i1 = sum(p[1] for p in pieces)
    i2 = sum(p[2] for p in pieces)
    maxlog = max(p[3] for p in pieces)
    if not collect:
        return i0, i1, i2, maxlog, None, None, None, None
    nodes, weights, values, cdf = [], [], [], []
    offset = 0.0
    for k, p in enumerate(pieces):
        nd = np.asarray(p[4])
        wt = np.asarray(p[5])
        vl = np.asarray(p[6])
        cd = np.asarray(p[7]) + offset
        if k > 0:
            # first node coincides with the previous piece's last node
            weights[-1] = weights[-1].copy()
            weights[-1][-1] += wt[0]
            nd, wt, vl, cd = nd[1:], wt[1:], vl[1:], cd[1:]
        nodes.append(nd)
        weights.append(wt)
        values.append(vl)
        cdf.append(cd)
        offset += p[0]
    return (i0, i1, i2, maxlog, np.concatenate(nodes), np.concatenate(weights),
            np.concatenate(values), np.concatenate(cdf))


def _quartic_pieces(tg, mode, width, shift, tol, collect):
    """Bulk in theta, polynomial tails in ``arctan((theta - x) / sigma)``.

    The tails are integrated to a tolerance set by the bulk integral, so
    negligible far tails do not drive refinement into the rounding noise
    of ``tan`` near its pole.
    """
    x, sg = tg.x, tg.sigma
    th = np.concatenate([_breaks(tg, mode, width), x + sg * np.array([-16.0, 16.0])])
    th = np.unique(th[(th >= tg.lo) & (th <= tg.hi)])
    lo_edge, hi_edge = float(th[0]), float(th[-1])
    bulk = _run(tg, False, th.tolist(), shift, mode, width, tol, collect)
    floor = (bulk[0], max(abs(bulk[1]), math.sqrt(max(bulk[0] * bulk[2], 0.0))), bulk[2])
    pieces = []
    if lo_edge > tg.lo:
        s_end = math.atan((lo_edge - x) / sg)
        s_lo = math.atan((tg.lo - x) / sg) if math.isfinite(tg.lo) else -_HALF_PI
        mid = np.arctan((lo_edge - x) / sg - _TAIL_STEPS)
        b = np.unique(np.concatenate([[s_lo, s_end], mid[(mid > s_lo) & (mid < s_end)]]))
        if b.size > 1:
            left = _run(tg, True, b.tolist(), shift, mode, width, tol, collect, floor)
            if collect:
                left = left[:4] + (_pin_last(left[4], lo_edge),) + left[5:]
            pieces.append(left)
    pieces.append(bulk)
    if hi_edge < tg.hi:
        s_start = math.atan((hi_edge - x) / sg)
        s_hi = math.atan((tg.hi - x) / sg) if math.isfinite(tg.hi) else _HALF_PI
        mid = np.arctan((hi_edge - x) / sg + _TAIL_STEPS)
        b = np.unique(np.concatenate([[s_start, s_hi], mid[(mid > s_start) & (mid < s_hi)]]))
        if b.size > 1:
            right = _run(tg, True, b.tolist(), shift, mode, width, tol, collect, floor)
            if collect:
                right = right[:4] + (_pin_first(right[4], hi_edge),) + right[5:]
            pieces.append(right)
    return _join(pieces, collect)


def _pin_last(nodes, value):
    nodes = list(nodes)
    nodes[-1] = value
    return nodes


def _pin_first(nodes, value):
    nodes = list(nodes)
    nodes[0] = value
    return nodes


def _integrate(prior, error, x, sigma, tol, collect):
    tg = _Target(prior, error, x, sigma)
    mode, top = tg.mode()
    wl = tg.half_width(mode, top, -1)
    wr = tg.half_width(mode, top, +1)
    ws = [w for w in (wl, wr) if w]
    width = min(ws) if ws else sigma
    if isinstance(error, QuarticErr):
        shift = top
        for _ in range(3):
            out = _quartic_pieces(tg, mode, width, shift, tol, collect)
            if out[3] <= shift + 30.0:
                break
            shift = out[3]
        return tg, mode, width, out, shift
    # normal error: doubling window in theta
    half = max(12.0 * sigma, 16.0 * width, abs(mode - x) + 12.0 * sigma)
    center_w = 0.5 * (x + mode)
    log_tol = math.log(tol)
    shift = top
    for _ in range(_MAX_DOUBLINGS):
        lo = max(center_w - half, tg.lo)
        hi = min(center_w + half, tg.hi)
        b = np.unique(_breaks(tg, mode, width, window=np.array([lo, hi])))
        out = _run(tg, False, b.tolist(), shift, mode, width, tol, collect)
        if out[3] > shift + 30.0:
            shift = out[3]
            continue
        edge_ok = True
        for e, bound in ((lo, tg.lo), (hi, tg.hi)):
            if e != bound and tg(e) > out[3] + log_tol - 10.0:
                edge_ok = False
        if edge_ok:
            break
        half *= 2.0
    return tg, mode, width, out, shift


def _finish(out, mode, width):
    i0, i1, i2, maxlog = out[:4]
    if not (i0 > 0 and math.isfinite(i0)):
        raise DegeneratePosteriorError("posterior integral is zero or not finite")
    m1 = i1 / i0
    mean = mode + width * m1
    var = max(width * width * (i2 / i0 - m1 * m1), 0.0)
    return mean, var, math.log(i0)


def posterior(prior, error, x: float, sigma: float, tol: float = 1e-10) -> PosteriorGrid:
    """Normalised posterior of theta given ``x`` observed with error scale ``sigma``.

    ``sigma = 0`` gives the point mass at ``x``.  Raises
    ``DegeneratePosteriorError`` when the prior puts no mass where the
    likelihood does.
    """
    x = float(x)
    sigma = float(sigma)
    if not math.isfinite(x):
        raise ParameterError(f"x must be finite, got {x}")
    if not (sigma >= 0 and math.isfinite(sigma)):
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        lp = float(prior.logpdf(x))
        if lp == -math.inf:
            raise DegeneratePosteriorError(f"point mass at x={x} lies outside the prior support")
        return _point_mass(x, lp)
    _, mode, width, out, shift = _integrate(prior, error, x, sigma, tol, True)
    mean, var, log_i0 = _finish(out, mode, width)
    nodes = np.asarray(out[4])
    weights = np.asarray(out[5])
    values = np.asarray(out[6]) / out[0]
    cdf = np.maximum.accumulate(np.clip(np.asarray(out[7]) / out[0], 0.0, 1.0))
    mean = min(max(mean, float(nodes[0])), float(nodes[-1]))
    return PosteriorGrid(nodes, weights, values, mean, var, log_i0 + shift, cdf)


def likelihood_posterior(error, x: float, sigma: float, tol: float = 1e-10) -> PosteriorGrid:
    """Posterior under the flat improper prior (the normalised likelihood)."""
    if not sigma > 0:
        raise ParameterError("likelihood posterior needs sigma > 0")
    return posterior(UniformImproper(), error, x, sigma, tol)


def posterior_moments(prior, error, x, sigma, tol: float = 1e-10):
    """Posterior (mean, variance) arrays for many units.

    Exact shortcuts: ``sigma = 0`` is the point mass at ``x``; a normal
    prior with normal error is conjugate; the flat prior with a symmetric
    error has mean ``x`` and variance ``sigma^2`` (both error models have
    unit standardised variance).  Everything else goes through quadrature
    without collecting the node grid.
    """
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    mean = np.empty_like(x)
    var = np.empty_like(x)
    for i in range(x.size):
        xi, si = float(x[i]), float(sigma[i])
        if si < 0 or not math.isfinite(si):
            raise ParameterError(f"sigma must be >= 0, got {si}")
        if si == 0.0:
            if float(prior.logpdf(xi)) == -math.inf:
                raise DegeneratePosteriorError(f"point mass at x={xi} lies outside the prior support")
            mean[i], var[i] = xi, 0.0
        elif isinstance(prior, Normal) and isinstance(error, NormalErr):
            mean[i], var[i] = conjugate_normal_posterior(prior.mu, prior.tau2, xi, si)
        elif isinstance(prior, UniformImproper):
            mean[i], var[i] = xi, si * si
        else:
            _, mode, width, out, _ = _integrate(prior, error, xi, si, tol, False)
            mean[i], var[i], _ = _finish(out, mode, width)
    return mean, var


def pairwise_less_prob(a: PosteriorGrid, b: PosteriorGrid) -> float:
    """P(theta_a < theta_b) for independent posteriors.

    Point masses go through the other posterior's CDF (an exact tie counts
    one half); otherwise ``sum F_a dF_b`` on the merged node set with
    trapezoidal averaging of ``F_a`` on each cell.
    """
    if a.is_point_mass and b.is_point_mass:
        xa, xb = a.nodes[0], b.nodes[0]
        return 1.0 if xa < xb else (0.5 if xa == xb else 0.0)
    if b.is_point_mass:
        return float(a.cdf(b.nodes[0]))
    if a.is_point_mass:
        return float(1.0 - b.cdf(a.nodes[0]))
    t = np.union1d(a.nodes, b.nodes)
    fa = a.cdf(t)
    fb = b.cdf(t)
    p = float(np.sum(0.5 * (fa[1:] + fa[:-1]) * np.diff(fb)))
    # mass of b below a's support (fa = 0 there) contributes nothing; above a's
    # support fa = 1 and the cell sum covers it up to b's last node
    return min(max(p, 0.0), 1.0)


def posterior_sample(g: PosteriorGrid, rng: np.random.Generator, n: int,
                     stratified: bool = False) -> np.ndarray:
    """Inverse-CDF draws with linear interpolation between nodes.

    With ``stratified`` the uniforms are one per stratum ``[k/n, (k+1)/n)``
    in shuffled order (Latin hypercube along this coordinate).
    """
    if stratified:
        u = (rng.permutation(n) + rng.random(n)) / n
    else:
        u = rng.random(n)
    if g.is_point_mass:
        return np.full(n, g.nodes[0])
    return np.interp(u, g.cdf_nodes, g.nodes)


def gaussian_less_prob(m1, v1, m2, v2):
    """P(A < B) for independent normals, exact."""
    s = np.sqrt(np.asarray(v1) + np.asarray(v2))
    d = np.asarray(m2) - np.asarray(m1)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(s > 0, d / np.where(s > 0, s, 1.0), np.sign(d) * np.inf)
    out = special.ndtr(z)
    return np.where((s == 0) & (d == 0), 0.5, out)
