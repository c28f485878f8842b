"""Pure-Python implementations of the numerical kernels.

This module is the reference for ``_core.pyx``; both expose the same
functions with the same semantics and are selected in ``_kernels``.

Prior codes: 0 uniform, 1 normal, 2 pareto, 3 abs-exponential, 4 superlight.
Error codes: 0 normal, 1 quartic.

Prior parameters are passed as ``(pa, pb, pc)`` where ``pc`` is the additive
log-normalising constant precomputed by the caller:

* normal:     pa=mu, pb=tau2
* pareto:     pa=theta_min, pb=alpha
* absexp:     unused
* superlight: unused
"""

import math

NEG_INF = float("-inf")
MAX_DEPTH = 48
LOG_QUARTIC = math.log(math.sqrt(2.0) / math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def log_prior(code, pa, pb, pc, theta):
    if code == 0:
        return 0.0
    if code == 1:
        d = theta - pa
        return -0.5 * d * d / pb + pc
    if code == 2:
        if theta < pa:
            return NEG_INF
        return pc - (pb + 1.0) * math.log(theta)
    if code == 3:
        if theta == 0.0:
            return NEG_INF
        a = abs(theta)
        return math.log(a) - a + pc
    if code == 4:
        q = 0.25 * theta * theta
        if q > 709.0:
            return NEG_INF
        return -math.exp(q) + pc
    raise ValueError("unknown prior code %r" % code)


def log_err(code, r, sigma, ec):
    """Log density of the error at residual ``r = x - theta``; ``ec`` is the
    constant ``-log(sigma) + log(normaliser)``."""
    z = r / sigma
    if code == 0:
        return -0.5 * z * z + ec
    if code == 1:
        z2 = z * z
        return ec - math.log1p(z2 * z2)
    raise ValueError("unknown error code %r" % code)


def log_post(prior_code, pa, pb, pc, err_code, ec, x, sigma, theta):
    lp = log_prior(prior_code, pa, pb, pc, theta)
    if lp == NEG_INF:
        return NEG_INF
    return lp + log_err(err_code, x - theta, sigma, ec)


class _Integrand:
    __slots__ = ("prior_code", "pa", "pb", "pc", "err_code", "ec", "x",
                 "sigma", "mapped", "shift", "center", "scale", "maxlog")

    def __init__(self, prior_code, pa, pb, pc, err_code, ec, x, sigma, mapped,
                 shift, center, scale):
        self.prior_code = prior_code
        self.pa = pa
        self.pb = pb
        self.pc = pc
        self.err_code = err_code
        self.ec = ec
        self.x = x
        self.sigma = sigma
        self.mapped = mapped
        self.shift = shift
        self.center = center
        self.scale = scale
        self.maxlog = NEG_INF

    def __call__(self, s):
        """Return (theta, jac, g, g*t, g*t^2) at parameter value ``s``."""
        if self.mapped:
            t = math.tan(s)
            theta = self.x + self.sigma * t
            jac = self.sigma * (1.0 + t * t)
        else:
            theta = s
            jac = 1.0
        lf = log_prior(self.prior_code, self.pa, self.pb, self.pc, theta)
        if lf != NEG_INF:
            lf += log_err(self.err_code, self.x - theta, self.sigma, self.ec)
        if lf > self.maxlog:
            self.maxlog = lf
        if lf == NEG_INF:
            return theta, jac, 0.0, 0.0, 0.0
        g = math.exp(min(lf - self.shift, 700.0)) * jac
        tt = (theta - self.center) / self.scale
        gt = g * tt
        return theta, jac, g, gt, gt * tt


def _simpson(h, fa, fm, fb):
    return (h / 6.0 * (fa[2] + 4.0 * fm[2] + fb[2]),
            h / 6.0 * (fa[3] + 4.0 * fm[3] + fb[3]),
            h / 6.0 * (fa[4] + 4.0 * fm[4] + fb[4]))


def _abs_simpson(h, fa, fm, fb):
    return (h / 6.0 * (fa[2] + 4.0 * fm[2] + fb[2]),
            h / 6.0 * (abs(fa[3]) + 4.0 * abs(fm[3]) + abs(fb[3])),
            h / 6.0 * (fa[4] + 4.0 * fm[4] + fb[4]))


class _Collector:
    __slots__ = ("nodes", "weights", "values", "cdf", "total")

    def __init__(self, first):
        theta, jac, g = first[0], first[1], first[2]
        self.nodes = [theta]
        self.weights = [0.0]
        self.values = [g / jac if jac > 0.0 else 0.0]
        self.cdf = [0.0]
        self.total = 0.0

    def panel(self, h, f0, f1, f2):
        """Append one Simpson panel whose left node is already stored."""
        w = h / 6.0
        self.weights[-1] += w * f0[1]
        self.nodes.append(f1[0])
        self.weights.append(4.0 * w * f1[1])
        self.values.append(f1[2] / f1[1] if f1[1] > 0.0 else 0.0)
        self.nodes.append(f2[0])
        self.weights.append(w * f2[1])
        self.values.append(f2[2] / f2[1] if f2[1] > 0.0 else 0.0)
        mass = w * (f0[2] + 4.0 * f1[2] + f2[2])
        half = h * (5.0 * f0[2] + 8.0 * f1[2] - f2[2]) / 24.0
        half = min(max(half, 0.0), mass)
        self.cdf.append(self.total + half)
        self.total += mass
        self.cdf.append(self.total)


def _adapt(F, a, b, fa, fm, fb, whole, eps, depth, acc, col):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = F(lm)
    frm = F(rm)
    h = 0.5 * (b - a)
    left = _simpson(h, fa, flm, fm)
    right = _simpson(h, fm, frm, fb)
    ok = (depth >= MAX_DEPTH or lm <= a or rm >= b
          or (b - a) <= 1e-13 * (abs(a) + abs(b))
          or (abs(left[0] + right[0] - whole[0]) <= 15.0 * eps[0]
              and abs(left[1] + right[1] - whole[1]) <= 15.0 * eps[1]
              and abs(left[2] + right[2] - whole[2]) <= 15.0 * eps[2]))
    if ok:
        for k in range(3):
            acc[k] += left[k] + right[k]
        if col is not None:
            col.panel(h, fa, flm, fm)
            col.panel(h, fm, frm, fb)
        return
    half_eps = (0.5 * eps[0], 0.5 * eps[1], 0.5 * eps[2])
    _adapt(F, a, m, fa, flm, fm, left, half_eps, depth + 1, acc, col)
    _adapt(F, m, b, fm, frm, fb, right, half_eps, depth + 1, acc, col)


def integrate(prior_code, pa, pb, pc, err_code, ec, x, sigma, mapped, breaks,
              shift, center, scale, tol, collect, ref_floor=None):
    """Adaptive Simpson integration of the shifted unnormalised posterior.

    ``breaks`` are sorted parameter values (theta, or arctan-mapped residual
    when ``mapped``) whose first and last entries are the integration limits.
    Integrates g, g*t and g*t^2 with t = (theta - center) / scale, each to
    relative tolerance ``tol``, shared equally between the initial panels
    and halved on each bisection.  The reference magnitude of each component
    is its coarse absolute integral over ``breaks``, raised to
    ``ref_floor[k]`` when given (so a tail piece can be integrated to a
    tolerance set by the bulk).  Panels narrower than ``1e-13`` relative to
    their position are accepted as they are.

    Returns ``(I0, I1, I2, maxlog, nodes, weights, values, cdf)``; the last
    four are ``None`` unless ``collect``.  ``values`` are shifted unnormalised
    densities in theta and ``cdf`` the cumulative mass at each node.
    """
    F = _Integrand(prior_code, pa, pb, pc, err_code, ec, x, sigma, bool(mapped),
                   shift, center, scale)
    pts = [float(b) for b in breaks]
    fs = [F(s) for s in pts]
    mids = []
    ref = [0.0, 0.0, 0.0]
    for i in range(len(pts) - 1):
        fm = F(0.5 * (pts[i] + pts[i + 1]))
        mids.append(fm)
        r = _abs_simpson(pts[i + 1] - pts[i], fs[i], fm, fs[i + 1])
        for k in range(3):
            ref[k] += r[k]
    if ref_floor is not None:
        ref = [max(r, float(f)) for r, f in zip(ref, ref_floor)]
    base = [tol * (r if r > 0.0 else 1e-300) for r in ref]
    acc = [0.0, 0.0, 0.0]
    col = _Collector(fs[0]) if collect else None
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        if b <= a:
            continue
        frac = 1.0 / (len(pts) - 1)
        eps = (base[0] * frac, base[1] * frac, base[2] * frac)
        whole = _simpson(b - a, fs[i], mids[i], fs[i + 1])
        _adapt(F, a, b, fs[i], mids[i], fs[i + 1], whole, eps, 0, acc, col)
    if col is None:
        return acc[0], acc[1], acc[2], F.maxlog, None, None, None, None
    return (acc[0], acc[1], acc[2], F.maxlog, col.nodes, col.weights,
            col.values, col.cdf)


def ascending_pairs(t):
    """Count pairs a < b with t[a] < t[b] and sum t[b] - t[a] over them.

    Merge sort, O(n log n).  Equal values are not counted.
    """
    vals = [float(v) for v in t]
    n = len(vals)
    if n < 2:
        return 0, 0.0
    buf = vals[:]
    count = 0
    gap = 0.0
    width = 1
    src, dst = vals, buf
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            taken = 0
            taken_sum = 0.0
            while i < mid and j < hi:
                if src[i] < src[j]:
                    dst[k] = src[i]
                    taken += 1
                    taken_sum += src[i]
                    i += 1
                else:
                    dst[k] = src[j]
                    count += taken
                    gap += taken * src[j] - taken_sum
                    j += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                count += taken
                gap += taken * src[j] - taken_sum
                j += 1
                k += 1
        src, dst = dst, src
        width *= 2
    return count, gap
