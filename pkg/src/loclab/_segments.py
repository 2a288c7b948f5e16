"""Moments of exp(beta*x - kappa*x^2/2) restricted to an interval.

Every 1-D component in :mod:`loclab.measures` is a mixture of such segments,
so tilting by ``(theta, t)`` only shifts ``beta`` and ``kappa``.  Two routes:

* ``closed_logmass_mean``: truncated-normal formulas written with ``erfcx`` so
  that one-sided tails do not underflow.  Used for the drift in the hot loop.
* ``gl_moments``: Gauss-Legendre on a window around the maximizer, cut where
  the integrand drops by e^-50.  Slower, but uniformly accurate, and the only
  route that returns variances.  Also the fallback wherever the closed form
  is ill-conditioned (narrow intervals, kappa near 0).
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc, erfcx

GL_ORDER = 64
# Closed form needs the interval to span at least this many Gaussian widths.
NARROW = 0.1
# Below this curvature m = beta/kappa gets large enough to cost digits.
KAPPA_MIN = 1e-4
WINDOW_LOG = 50.0

_x, _w = np.polynomial.legendre.leggauss(GL_ORDER)
GL_NODES = 0.5 * (_x + 1.0)
GL_WEIGHTS = 0.5 * _w

_SQRT2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_SQRT_PI_OVER_2 = math.sqrt(math.pi / 2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class DivergentTiltError(ValueError):
    """The tilted density is not integrable."""


def _window(g, kappa):
    # distance d >= 0 with g*d + kappa*d^2/2 = WINDOW_LOG
    return 2.0 * WINDOW_LOG / (g + np.sqrt(g * g + 2.0 * WINDOW_LOG * kappa))


def gl_moments(u: float, v: float, beta, kappa: float, chunk: int = 4096):
    """(log mass, mean, variance) of exp(beta x - kappa x^2/2) on [u, v].

    ``beta`` is an array; ``u``, ``v`` and ``kappa`` are scalars.  Raises
    :class:`DivergentTiltError` when an infinite side grows.
    """
    beta = np.asarray(beta, dtype=float)
    shape = beta.shape
    beta = beta.ravel()
    logm = np.empty_like(beta)
    mean = np.empty_like(beta)
    var = np.empty_like(beta)
    for lo in range(0, beta.size, chunk):
        sl = slice(lo, lo + chunk)
        logm[sl], mean[sl], var[sl] = _gl_chunk(u, v, beta[sl], kappa)
    return logm.reshape(shape), mean.reshape(shape), var.reshape(shape)


def _gl_chunk(u, v, beta, kappa):
    if kappa > 0.0:
        xm = np.clip(beta / kappa, u, v)
    else:
        if (np.isinf(v) and np.any(beta >= 0.0)) or (np.isinf(u) and np.any(beta <= 0.0)):
            raise DivergentTiltError("divergent tilt")
        flat = beta == 0.0
        if np.any(flat):
            w = v - u
            logm = np.full_like(beta, math.log(w))
            mean = np.full_like(beta, 0.5 * (u + v))
            var = np.full_like(beta, w * w / 12.0)
            if not np.all(flat):
                rest = _gl_chunk(u, v, beta[~flat], kappa)
                logm[~flat], mean[~flat], var[~flat] = rest
            return logm, mean, var
        xm = np.where(beta > 0.0, v, u)
    g = beta - kappa * xm
    with np.errstate(divide="ignore", invalid="ignore"):
        len_l = np.minimum(xm - u, _window(np.maximum(g, 0.0), kappa))
        len_r = np.minimum(v - xm, _window(np.maximum(-g, 0.0), kappa))
    y = np.concatenate([-len_l[:, None] * GL_NODES, len_r[:, None] * GL_NODES], axis=1)
    wts = np.concatenate([len_l[:, None] * GL_WEIGHTS, len_r[:, None] * GL_WEIGHTS], axis=1)
    wts = wts * np.exp(g[:, None] * y - 0.5 * kappa * y * y)
    m0 = wts.sum(axis=1)
    my = (wts * y).sum(axis=1) / m0
    dy = y - my[:, None]
    var = (wts * dy * dy).sum(axis=1) / m0
    logm = beta * xm - 0.5 * kappa * xm * xm + np.log(m0)
    return logm, xm + my, var


def _one_sided(a, b):
    """Pieces for a standard normal restricted to [a, b] with a >= 0."""
    with np.errstate(invalid="ignore", over="ignore"):
        d = np.where(np.isinf(b), np.inf, 0.5 * (b - a) * (b + a))
        ed = np.exp(-d)
        tail = np.where(np.isinf(b), 0.0, erfcx(b / _SQRT2) * ed)
    den = erfcx(a / _SQRT2) - tail
    num = -np.expm1(-d)
    return _SQRT_2_OVER_PI * num / den, den


def closed_logmass_mean(u: float, v: float, beta, kappa: float):
    """(log mass, mean) via erfcx-based truncated-normal formulas.

    Entries where the closed form loses digits are routed to
    :func:`gl_moments`.
    """
    beta = np.asarray(beta, dtype=float)
    if kappa < KAPPA_MIN:
        logm, mean, _ = gl_moments(u, v, beta, kappa)
        return logm, mean
    rk = math.sqrt(kappa)
    s = 1.0 / rk
    m = beta / kappa
    with np.errstate(invalid="ignore"):
        a = (u - m) * rk
        b = (v - m) * rk
    logm = np.empty_like(beta)
    mean = np.empty_like(beta)
    narrow = (b - a) < NARROW
    right = (a >= 0.0) & ~narrow
    left = (b <= 0.0) & ~narrow
    mid = ~(right | left | narrow)
    if np.any(right):
        ez, den = _one_sided(a[right], b[right])
        mean[right] = m[right] + s * ez
        logm[right] = beta[right] * u - 0.5 * kappa * u * u + np.log(s * _SQRT_PI_OVER_2 * den)
    if np.any(left):
        ez, den = _one_sided(-b[left], -a[left])
        mean[left] = m[left] - s * ez
        logm[left] = beta[left] * v - 0.5 * kappa * v * v + np.log(s * _SQRT_PI_OVER_2 * den)
    if np.any(mid):
        am, bm = a[mid], b[mid]
        z = 1.0 - 0.5 * erfc(bm / _SQRT2) - 0.5 * erfc(-am / _SQRT2)
        with np.errstate(invalid="ignore", over="ignore"):
            pa = np.where(np.isinf(am), 0.0, np.exp(-0.5 * am * am))
            pb = np.where(np.isinf(bm), 0.0, np.exp(-0.5 * bm * bm))
        mean[mid] = m[mid] + s * (pa - pb) / (math.sqrt(2.0 * math.pi) * z)
        logm[mid] = 0.5 * beta[mid] * m[mid] + math.log(s) + _LOG_SQRT_2PI + np.log(z)
    if np.any(narrow):
        lg, mn, _ = gl_moments(u, v, beta[narrow], kappa)
        logm[narrow] = lg
        mean[narrow] = mn
    return logm, mean


def mixture_mean(seg_rows, beta_shift, t: float, closed: bool = True):
    """Mean of a segment mixture tilted by (beta_shift, t).

    ``seg_rows`` is an iterable of (u, v, c0, c1, k0).
    """
    beta_shift = np.asarray(beta_shift, dtype=float)
    logs, means = [], []
    for u, v, c0, c1, k0 in seg_rows:
        kappa = k0 + t
        if closed:
            lg, mn = closed_logmass_mean(u, v, c1 + beta_shift, kappa)
        else:
            lg, mn, _ = gl_moments(u, v, c1 + beta_shift, kappa)
        logs.append(c0 + lg)
        means.append(mn)
    if len(logs) == 1:
        return means[0]
    logs = np.array(logs)
    w = np.exp(logs - logs.max(axis=0))
    return (w * np.array(means)).sum(axis=0) / w.sum(axis=0)


def mixture_moments(seg_rows, beta_shift, t: float):
    """(log partition, mean, variance) of a tilted segment mixture."""
    beta_shift = np.asarray(beta_shift, dtype=float)
    logs, means, vars_ = [], [], []
    for u, v, c0, c1, k0 in seg_rows:
        kappa = k0 + t
        if math.isinf(u) and math.isinf(v):
            # whole line: exact Gaussian
            b = c1 + beta_shift
            logs.append(c0 + 0.5 * b * b / kappa + _LOG_SQRT_2PI - 0.5 * math.log(kappa))
            means.append(b / kappa)
            vars_.append(np.full_like(b, 1.0 / kappa))
            continue
        lg, mn, vr = gl_moments(u, v, c1 + beta_shift, kappa)
        logs.append(c0 + lg)
        means.append(mn)
        vars_.append(vr)
    if len(logs) == 1:
        return logs[0], means[0], vars_[0]
    logs = np.array(logs)
    top = logs.max(axis=0)
    w = np.exp(logs - top)
    wsum = w.sum(axis=0)
    w = w / wsum
    means = np.array(means)
    mean = (w * means).sum(axis=0)
    var = (w * (np.array(vars_) + (means - mean) ** 2)).sum(axis=0)
    return top + np.log(wsum), mean, var
