# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: the Euler-Maruyama drift loop for product models and
cyclic Jacobi sweeps.  Mirrors ``loclab._fallback`` operation for operation.
"""
import numpy as np

from libc.math cimport INFINITY, erfc, exp, expm1, fabs, isinf, isnan, log, sqrt
from scipy.special.cython_special cimport erfcx as _sc_erfcx

from loclab._segments import KAPPA_MIN as _KAPPA_MIN, NARROW as _NARROW, WINDOW_LOG as _WINDOW_LOG

cdef double KAPPA_MIN = _KAPPA_MIN
cdef double NARROW = _NARROW
cdef double WINDOW_LOG = _WINDOW_LOG
cdef double SQRT2 = sqrt(2.0)
cdef double SQRT_2_OVER_PI = sqrt(2.0 / 3.141592653589793)
cdef double SQRT_PI_OVER_2 = sqrt(3.141592653589793 / 2.0)
cdef double SQRT_2PI = sqrt(2.0 * 3.141592653589793)
cdef double LOG_SQRT_2PI = 0.5 * log(2.0 * 3.141592653589793)

BACKEND = "compiled"


cdef inline double _erfcx(double x) noexcept nogil:
    return _sc_erfcx(x)


cdef inline double _window(double g, double kappa) noexcept nogil:
    return 2.0 * WINDOW_LOG / (g + sqrt(g * g + 2.0 * WINDOW_LOG * kappa))


cdef int _seg_gl(double u, double v, double beta, double kappa,
                 const double[::1] gx, const double[::1] gw,
                 double* logm, double* mean) noexcept nogil:
    cdef double xm, g, len_l, len_r, y, w, m0 = 0.0, m1 = 0.0
    cdef Py_ssize_t j, n = gx.shape[0]
    if kappa > 0.0:
        xm = beta / kappa
        if xm < u:
            xm = u
        elif xm > v:
            xm = v
    else:
        if (isinf(v) and beta >= 0.0) or (isinf(u) and beta <= 0.0):
            return -1
        if beta == 0.0:
            logm[0] = log(v - u)
            mean[0] = 0.5 * (u + v)
            return 0
        xm = v if beta > 0.0 else u
    g = beta - kappa * xm
    len_l = _window(g if g > 0.0 else 0.0, kappa)
    if xm - u < len_l:
        len_l = xm - u
    len_r = _window(-g if g < 0.0 else 0.0, kappa)
    if v - xm < len_r:
        len_r = v - xm
    for j in range(n):
        y = -len_l * gx[j]
        w = len_l * gw[j] * exp(g * y - 0.5 * kappa * y * y)
        m0 += w
        m1 += w * y
    for j in range(n):
        y = len_r * gx[j]
        w = len_r * gw[j] * exp(g * y - 0.5 * kappa * y * y)
        m0 += w
        m1 += w * y
    logm[0] = beta * xm - 0.5 * kappa * xm * xm + log(m0)
    mean[0] = xm + m1 / m0
    return 0


cdef inline void _one_sided(double a, double b, double* ez, double* den) noexcept nogil:
    cdef double d, tail
    if isinf(b):
        d = INFINITY
        tail = 0.0
    else:
        d = 0.5 * (b - a) * (b + a)
        tail = _erfcx(b / SQRT2) * exp(-d)
    den[0] = _erfcx(a / SQRT2) - tail
    ez[0] = SQRT_2_OVER_PI * (-expm1(-d)) / den[0]


cdef int _seg_closed(double u, double v, double beta, double kappa,
                     const double[::1] gx, const double[::1] gw,
                     double* logm, double* mean) noexcept nogil:
    cdef double rk, s, m, a, b, ez, den, z, pa, pb
    if kappa < KAPPA_MIN:
        return _seg_gl(u, v, beta, kappa, gx, gw, logm, mean)
    rk = sqrt(kappa)
    s = 1.0 / rk
    m = beta / kappa
    a = (u - m) * rk
    b = (v - m) * rk
    if b - a < NARROW:
        return _seg_gl(u, v, beta, kappa, gx, gw, logm, mean)
    if a >= 0.0:
        _one_sided(a, b, &ez, &den)
        mean[0] = m + s * ez
        logm[0] = beta * u - 0.5 * kappa * u * u + log(s * SQRT_PI_OVER_2 * den)
    elif b <= 0.0:
        _one_sided(-b, -a, &ez, &den)
        mean[0] = m - s * ez
        logm[0] = beta * v - 0.5 * kappa * v * v + log(s * SQRT_PI_OVER_2 * den)
    else:
        z = 1.0 - 0.5 * erfc(b / SQRT2) - 0.5 * erfc(-a / SQRT2)
        pa = 0.0 if isinf(a) else exp(-0.5 * a * a)
        pb = 0.0 if isinf(b) else exp(-0.5 * b * b)
        mean[0] = m + s * (pa - pb) / (SQRT_2PI * z)
        logm[0] = 0.5 * beta * m + log(s) + LOG_SQRT_2PI + log(z)
    return 0


cdef double _component_mean(Py_ssize_t c, double theta, double t,
                            const double[:, ::1] seg, const Py_ssize_t[::1] offsets,
                            const double[::1] gx, const double[::1] gw) noexcept nogil:
    cdef Py_ssize_t k, first = offsets[c], last = offsets[c + 1]
    cdef double logm, mean, lg, top = -INFINITY, sw = 0.0, sm = 0.0, scale, w
    if last - first == 1:
        if _seg_closed(seg[first, 0], seg[first, 1], seg[first, 3] + theta,
                       seg[first, 4] + t, gx, gw, &logm, &mean) < 0:
            return 0.0 / 0.0
        return mean
    for k in range(first, last):
        if _seg_closed(seg[k, 0], seg[k, 1], seg[k, 3] + theta, seg[k, 4] + t,
                       gx, gw, &logm, &mean) < 0:
            return 0.0 / 0.0
        lg = seg[k, 2] + logm
        if lg > top:
            scale = exp(top - lg)
            sw *= scale
            sm *= scale
            top = lg
        w = exp(lg - top)
        sw += w
        sm += w * mean
    return sm / sw


def component_means(const double[::1] theta, const Py_ssize_t[::1] comp, double t,
                    const double[:, ::1] seg, const Py_ssize_t[::1] offsets,
                    const double[::1] gx, const double[::1] gw):
    """Tilted means for a flat batch of (theta, component) pairs."""
    cdef Py_ssize_t i, n = theta.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _component_mean(comp[i], theta[i], t, seg, offsets, gx, gw)
    return out


def drift_paths(const double[:, :, ::1] noise, const Py_ssize_t[::1] coord_comp,
                const double[:, ::1] seg, const Py_ssize_t[::1] offsets, double h,
                const Py_ssize_t[::1] record_steps,
                const double[::1] gx, const double[::1] gw):
    """Advance every path through all steps; return theta at the record steps.

    Output has shape (paths, records, dim).  A NaN drift (divergent tilt)
    stops the loop and is reported through the second return value as the
    offending path index, or -1 when all paths completed.
    """
    cdef Py_ssize_t n_paths = noise.shape[0], n_steps = noise.shape[1], dim = noise.shape[2]
    cdef Py_ssize_t n_rec = record_steps.shape[0]
    cdef Py_ssize_t p, j, i, r, bad = -1
    cdef double t, a, sqh = sqrt(h)
    out = np.zeros((n_paths, n_rec, dim))
    theta_arr = np.zeros(dim)
    cdef double[:, :, ::1] o = out
    cdef double[::1] theta = theta_arr
    with nogil:
        for p in range(n_paths):
            for i in range(dim):
                theta[i] = 0.0
            r = 0
            while r < n_rec and record_steps[r] == 0:
                r += 1
            for j in range(n_steps):
                t = j * h
                for i in range(dim):
                    if t == 0.0 and theta[i] == 0.0:
                        a = 0.0
                    else:
                        a = _component_mean(coord_comp[i], theta[i], t, seg, offsets, gx, gw)
                    if isnan(a):
                        bad = p
                        break
                    theta[i] = theta[i] + a * h + sqh * noise[p, j, i]
                if bad >= 0:
                    break
                while r < n_rec and record_steps[r] == j + 1:
                    for i in range(dim):
                        o[p, r, i] = theta[i]
                    r += 1
            if bad >= 0:
                break
    return out, bad


def jacobi_sweeps(double[:, ::1] a, double[:, ::1] v, double tol, int max_sweeps=100):
    """Cyclic Jacobi rotations in place; returns the number of sweeps used."""
    cdef Py_ssize_t n = a.shape[0], p, q, r
    cdef double norm2 = 0.0, off, app, aqq, apq, th, t, c, s, tau, arp, arq
    cdef int sweep
    for p in range(n):
        for q in range(n):
            norm2 += a[p, q] * a[p, q]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += a[p, q] * a[p, q]
        if sqrt(off) <= tol * sqrt(norm2):
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                if fabs(apq) < 1e-150 * fabs(aqq - app):
                    t = apq / (aqq - app)
                else:
                    th = (aqq - app) / (2.0 * apq)
                    t = 1.0 / (fabs(th) + sqrt(th * th + 1.0))
                    if th < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    if r != p and r != q:
                        arp = a[r, p]
                        arq = a[r, q]
                        a[r, p] = arp - s * (arq + tau * arp)
                        a[r, q] = arq + s * (arp - tau * arq)
                        a[p, r] = a[r, p]
                        a[q, r] = a[r, q]
                for r in range(n):
                    arp = v[r, p]
                    arq = v[r, q]
                    v[r, p] = arp - s * (arq + tau * arp)
                    v[r, q] = arq + s * (arp - tau * arq)
    raise RuntimeError("Jacobi iteration did not converge")
