# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical kernels; semantics mirror ``_core_py``."""

from libc.math cimport exp, log, log1p, tan, fabs, INFINITY
from libc.stdlib cimport malloc, free

cdef double NEG_INF = -INFINITY
cdef int MAX_DEPTH = 48


cdef inline double _log_prior(int code, double pa, double pb, double pc,
                              double theta) noexcept nogil:
    cdef double d, a, q
    if code == 0:
        return 0.0
    if code == 1:
        d = theta - pa
        return -0.5 * d * d / pb + pc
    if code == 2:
        if theta < pa:
            return NEG_INF
        return pc - (pb + 1.0) * log(theta)
    if code == 3:
        if theta == 0.0:
            return NEG_INF
        a = fabs(theta)
        return log(a) - a + pc
    if code == 4:
        q = 0.25 * theta * theta
        if q > 709.0:
            return NEG_INF
        return -exp(q) + pc
    return NEG_INF


cdef inline double _log_err(int code, double r, double sigma,
                            double ec) noexcept nogil:
    cdef double z = r / sigma
    cdef double z2
    if code == 0:
        return -0.5 * z * z + ec
    z2 = z * z
    return ec - log1p(z2 * z2)


def log_prior(int code, double pa, double pb, double pc, double theta):
    if code < 0 or code > 4:
        raise ValueError("unknown prior code %r" % code)
    return _log_prior(code, pa, pb, pc, theta)


def log_err(int code, double r, double sigma, double ec):
    if code < 0 or code > 1:
        raise ValueError("unknown error code %r" % code)
    return _log_err(code, r, sigma, ec)


def log_post(int prior_code, double pa, double pb, double pc, int err_code,
             double ec, double x, double sigma, double theta):
    cdef double lp = _log_prior(prior_code, pa, pb, pc, theta)
    if lp == NEG_INF:
        return NEG_INF
    return lp + _log_err(err_code, x - theta, sigma, ec)


cdef struct Pt:
    double theta
    double jac
    double g
    double gt
    double gt2


cdef struct Ctx:
    int prior_code
    double pa, pb, pc
    int err_code
    double ec, x, sigma
    int mapped
    double shift, center, scale
    double maxlog


cdef inline Pt _eval(Ctx* c, double s) noexcept nogil:
    cdef Pt p
    cdef double t, lf, tt
    if c.mapped:
        t = tan(s)
        p.theta = c.x + c.sigma * t
        p.jac = c.sigma * (1.0 + t * t)
    else:
        p.theta = s
        p.jac = 1.0
    lf = _log_prior(c.prior_code, c.pa, c.pb, c.pc, p.theta)
    if lf != NEG_INF:
        lf = lf + _log_err(c.err_code, c.x - p.theta, c.sigma, c.ec)
    if lf > c.maxlog:
        c.maxlog = lf
    if lf == NEG_INF:
        p.g = 0.0
        p.gt = 0.0
        p.gt2 = 0.0
        return p
    if lf - c.shift > 700.0:
        p.g = exp(700.0) * p.jac
    else:
        p.g = exp(lf - c.shift) * p.jac
    tt = (p.theta - c.center) / c.scale
    p.gt = p.g * tt
    p.gt2 = p.gt * tt
    return p


cdef class _Collector:
    cdef public list nodes, weights, values, cdf
    cdef double total

    def __init__(self):
        self.nodes = []
        self.weights = []
        self.values = []
        self.cdf = []
        self.total = 0.0

    cdef void start(self, Pt p):
        self.nodes.append(p.theta)
        self.weights.append(0.0)
        self.values.append(p.g / p.jac if p.jac > 0.0 else 0.0)
        self.cdf.append(0.0)

    cdef void panel(self, double h, Pt f0, Pt f1, Pt f2):
        cdef double w = h / 6.0
        cdef double mass, half
        cdef Py_ssize_t last = len(self.weights) - 1
        self.weights[last] = self.weights[last] + w * f0.jac
        self.nodes.append(f1.theta)
        self.weights.append(4.0 * w * f1.jac)
        self.values.append(f1.g / f1.jac if f1.jac > 0.0 else 0.0)
        self.nodes.append(f2.theta)
        self.weights.append(w * f2.jac)
        self.values.append(f2.g / f2.jac if f2.jac > 0.0 else 0.0)
        mass = w * (f0.g + 4.0 * f1.g + f2.g)
        half = h * (5.0 * f0.g + 8.0 * f1.g - f2.g) / 24.0
        if half < 0.0:
            half = 0.0
        if half > mass:
            half = mass
        self.cdf.append(self.total + half)
        self.total += mass
        self.cdf.append(self.total)


cdef void _adapt(Ctx* c, double a, double b, Pt fa, Pt fm, Pt fb,
                 double w0, double w1, double w2,
                 double e0, double e1, double e2, int depth,
                 double* acc, _Collector col):
    cdef double m = 0.5 * (a + b)
    cdef double lm = 0.5 * (a + m)
    cdef double rm = 0.5 * (m + b)
    cdef Pt flm = _eval(c, lm)
    cdef Pt frm = _eval(c, rm)
    cdef double h = 0.5 * (b - a)
    cdef double l0 = h / 6.0 * (fa.g + 4.0 * flm.g + fm.g)
    cdef double l1 = h / 6.0 * (fa.gt + 4.0 * flm.gt + fm.gt)
    cdef double l2 = h / 6.0 * (fa.gt2 + 4.0 * flm.gt2 + fm.gt2)
    cdef double r0 = h / 6.0 * (fm.g + 4.0 * frm.g + fb.g)
    cdef double r1 = h / 6.0 * (fm.gt + 4.0 * frm.gt + fb.gt)
    cdef double r2 = h / 6.0 * (fm.gt2 + 4.0 * frm.gt2 + fb.gt2)
    if (depth >= MAX_DEPTH or lm <= a or rm >= b
            or (b - a) <= 1e-13 * (fabs(a) + fabs(b))
            or (fabs(l0 + r0 - w0) <= 15.0 * e0
                and fabs(l1 + r1 - w1) <= 15.0 * e1
                and fabs(l2 + r2 - w2) <= 15.0 * e2)):
        acc[0] += l0 + r0
        acc[1] += l1 + r1
        acc[2] += l2 + r2
        if col is not None:
            col.panel(h, fa, flm, fm)
            col.panel(h, fm, frm, fb)
        return
    _adapt(c, a, m, fa, flm, fm, l0, l1, l2, 0.5 * e0, 0.5 * e1, 0.5 * e2,
           depth + 1, acc, col)
    _adapt(c, m, b, fm, frm, fb, r0, r1, r2, 0.5 * e0, 0.5 * e1, 0.5 * e2,
           depth + 1, acc, col)


def integrate(int prior_code, double pa, double pb, double pc, int err_code,
              double ec, double x, double sigma, mapped, breaks,
              double shift, double center, double scale, double tol, collect,
              ref_floor=None):
    """Adaptive Simpson integration of the shifted unnormalised posterior.

    See ``_core_py.integrate`` for the contract.
    """
    cdef Ctx c
    c.prior_code = prior_code
    c.pa = pa
    c.pb = pb
    c.pc = pc
    c.err_code = err_code
    c.ec = ec
    c.x = x
    c.sigma = sigma
    c.mapped = 1 if mapped else 0
    c.shift = shift
    c.center = center
    c.scale = scale
    c.maxlog = NEG_INF
    cdef list pts = [float(b) for b in breaks]
    cdef Py_ssize_t n = len(pts)
    cdef Py_ssize_t i
    cdef double* s = <double*> malloc(n * sizeof(double))
    cdef Pt* fs = <Pt*> malloc(n * sizeof(Pt))
    cdef Pt* mids = <Pt*> malloc(n * sizeof(Pt))
    if s == NULL or fs == NULL or mids == NULL:
        free(s)
        free(fs)
        free(mids)
        raise MemoryError()
    cdef double ref0 = 0.0, ref1 = 0.0, ref2 = 0.0
    cdef double a, b, h, frac
    cdef double acc[3]
    cdef _Collector col = None
    acc[0] = 0.0
    acc[1] = 0.0
    acc[2] = 0.0
    try:
        for i in range(n):
            s[i] = pts[i]
            fs[i] = _eval(&c, s[i])
        for i in range(n - 1):
            a = s[i]
            b = s[i + 1]
            mids[i] = _eval(&c, 0.5 * (a + b))
            h = (b - a) / 6.0
            ref0 += h * (fs[i].g + 4.0 * mids[i].g + fs[i + 1].g)
            ref1 += h * (fabs(fs[i].gt) + 4.0 * fabs(mids[i].gt) + fabs(fs[i + 1].gt))
            ref2 += h * (fs[i].gt2 + 4.0 * mids[i].gt2 + fs[i + 1].gt2)
        if ref_floor is not None:
            ref0 = max(ref0, float(ref_floor[0]))
            ref1 = max(ref1, float(ref_floor[1]))
            ref2 = max(ref2, float(ref_floor[2]))
        if ref0 <= 0.0:
            ref0 = 1e-300
        if ref1 <= 0.0:
            ref1 = 1e-300
        if ref2 <= 0.0:
            ref2 = 1e-300
        if collect:
            col = _Collector()
            col.start(fs[0])
        for i in range(n - 1):
            a = s[i]
            b = s[i + 1]
            if b <= a:
                continue
            frac = 1.0 / (n - 1)
            h = (b - a) / 6.0
            _adapt(&c, a, b, fs[i], mids[i], fs[i + 1],
                   h * (fs[i].g + 4.0 * mids[i].g + fs[i + 1].g),
                   h * (fs[i].gt + 4.0 * mids[i].gt + fs[i + 1].gt),
                   h * (fs[i].gt2 + 4.0 * mids[i].gt2 + fs[i + 1].gt2),
                   tol * ref0 * frac, tol * ref1 * frac, tol * ref2 * frac,
                   0, acc, col)
    finally:
        free(s)
        free(fs)
        free(mids)
    if col is None:
        return acc[0], acc[1], acc[2], c.maxlog, None, None, None, None
    return (acc[0], acc[1], acc[2], c.maxlog, col.nodes, col.weights,
            col.values, col.cdf)


def ascending_pairs(t):
    """Count pairs a < b with t[a] < t[b] and sum t[b] - t[a] over them."""
    import numpy as np
    cdef double[::1] va = np.array(t, dtype=np.float64).ravel()
    cdef Py_ssize_t n = va.shape[0]
    if n < 2:
        return 0, 0.0
    cdef double[::1] vb = np.empty(n, dtype=np.float64)
    cdef double* src = &va[0]
    cdef double* dst = &vb[0]
    cdef double* tmp
    cdef long long count = 0
    cdef long long taken
    cdef double gap = 0.0, taken_sum
    cdef Py_ssize_t width = 1, lo, mid, hi, i, j, k
    with nogil:
        while width < n:
            lo = 0
            while lo < n:
                mid = lo + width
                if mid > n:
                    mid = n
                hi = lo + 2 * width
                if hi > n:
                    hi = n
                i = lo
                j = mid
                k = lo
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
                lo += 2 * width
            tmp = src
            src = dst
            dst = tmp
            width *= 2
    return int(count), gap
