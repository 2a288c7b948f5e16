"""Pure numpy versions of the compiled kernels.

Same arithmetic as ``_kernels.pyx``, vectorized across paths instead of
looped.  Agreement is to rounding, not bitwise: summation order inside the
quadrature differs.
"""
from __future__ import annotations

import math

import numpy as np

from loclab._segments import DivergentTiltError, mixture_mean

BACKEND = "fallback"


def _rows(seg, offsets, c):
    return [tuple(r) for r in seg[offsets[c]:offsets[c + 1]]]


def component_means(theta, comp, t, seg, offsets, gx=None, gw=None):
    """Tilted means for a flat batch of (theta, component) pairs."""
    theta = np.asarray(theta, dtype=float)
    comp = np.asarray(comp)
    out = np.empty_like(theta)
    for c in np.unique(comp):
        sel = comp == c
        try:
            out[sel] = mixture_mean(_rows(seg, offsets, c), theta[sel], t)
        except DivergentTiltError:
            out[sel] = np.nan
    return out


def drift_paths(noise, coord_comp, seg, offsets, h, record_steps, gx=None, gw=None):
    """See ``_kernels.drift_paths``."""
    noise = np.asarray(noise, dtype=float)
    n_paths, n_steps, dim = noise.shape
    record_steps = np.asarray(record_steps)
    coord_comp = np.asarray(coord_comp)
    out = np.zeros((n_paths, len(record_steps), dim))
    theta = np.zeros((n_paths, dim))
    sqh = math.sqrt(h)
    groups = [(c, coord_comp == c, _rows(seg, offsets, c)) for c in np.unique(coord_comp)]
    for j in range(n_steps):
        t = j * h
        a = np.zeros_like(theta)
        for _, sel, rows in groups:
            th = theta[:, sel]
            live = ~((t == 0.0) & (th == 0.0))
            if np.any(live):
                block = np.zeros_like(th)
                try:
                    block[live] = mixture_mean(rows, th[live], t)
                except DivergentTiltError:
                    block[live] = np.nan
                a[:, sel] = block
        if np.isnan(a).any():
            bad = int(np.nonzero(np.isnan(a).any(axis=1))[0][0])
            return out, bad
        theta = theta + a * h + sqh * noise[:, j, :]
        out[:, record_steps == j + 1, :] = theta[:, None, :]
    return out, -1


def jacobi_sweeps(a, v, tol, max_sweeps=100):
    """Cyclic Jacobi rotations in place; returns the number of sweeps used."""
    n = a.shape[0]
    norm = math.sqrt(float((a * a).sum()))
    for sweep in range(max_sweeps + 1):
        off = math.sqrt(float(((a - np.diag(np.diag(a))) ** 2).sum()))
        if off <= tol * norm:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app, aqq = a[p, p], a[q, q]
                diff = aqq - app
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff
                else:
                    th = diff / (2.0 * apq)
                    t = math.copysign(1.0 / (abs(th) + math.sqrt(th * th + 1.0)), th)
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                rp = a[:, p].copy()
                rq = a[:, q].copy()
                a[:, p] = rp - s * (rq + tau * rp)
                a[:, q] = rq + s * (rp - tau * rq)
                a[p, :] = a[:, p]
                a[q, :] = a[:, q]
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = vp - s * (vq + tau * vp)
                v[:, q] = vq + s * (vp - tau * vq)
    raise RuntimeError("Jacobi iteration did not converge")
