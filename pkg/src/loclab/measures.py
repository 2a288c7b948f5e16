"""Isotropic log-concave models and the moments of their exponential tilts.

A model's density rho is tilted as rho(x) exp(<theta, x> - t|x|^2/2).  Every
1-D component is stored as a mixture of segments (u, v, c0, c1, k0) with
log-density c0 + c1*x - k0*x^2/2 on [u, v], so a tilt only shifts c1 by theta
and k0 by t (see :mod:`loclab._segments`).
"""
from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from loclab._segments import DivergentTiltError, mixture_moments
from loclab.numerics import SymMatrix, adaptive_quad, jacobi_spectrum

__all__ = [
    "Component1D",
    "DivergentTiltError",
    "LichnerowiczViolation",
    "MeasureModel",
    "Moments",
    "IsotropyReport",
    "parse_model_spec",
    "poincare_gaussian_check",
    "tilted_moments",
    "tilted_moments_batch",
    "verify_isotropic",
]

LICHNEROWICZ_TOL = 1e-8
ISOTROPY_TOL = 1e-8
_STD_RTOL = 1e-12
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class LichnerowiczViolation(AssertionError):
    """A covariance exceeded 1/t; signals a discretization or quadrature bug."""


def _affine_segments(segs, mu, sigma, log_mass):
    """Rewrite segments for y = (x - mu)/sigma, renormalized to unit mass."""
    out = []
    for u, v, c0, c1, k0 in segs:
        out.append((
            (u - mu) / sigma,
            (v - mu) / sigma,
            math.log(sigma) + c0 + c1 * mu - 0.5 * k0 * mu * mu - log_mass,
            c1 * sigma - k0 * mu * sigma,
            k0 * sigma * sigma,
        ))
    return tuple(out)


def _segment_logpdf(segs, x):
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    for u, v, c0, c1, k0 in reversed(segs):
        inside = (x >= u) & (x <= v)
        out = np.where(inside, c0 + c1 * x - 0.5 * k0 * x * x, out)
    return out


def _quad_moments(segs):
    """(mass, mean, variance) of exp(segment log-density) by adaptive quadrature.

    Each segment is integrated on its own interval, where the integrand is a
    smooth Gaussian-type bump, so Simpson never straddles a kink.
    """
    def piece(seg, k, shift=0.0):
        u, v, c0, c1, k0 = seg

        def g(x):
            return (x - shift) ** k * np.exp(c0 + c1 * x - 0.5 * k0 * x * x)

        return adaptive_quad(g, (u, v), _STD_RTOL)

    mass = math.fsum(piece(sg, 0) for sg in segs)
    mean = math.fsum(piece(sg, 1) for sg in segs) / mass
    # shift by the mean so the second moment does not cancel
    var = math.fsum(piece(sg, 2, mean) for sg in segs) / mass
    return mass, mean, var


@dataclass(frozen=True)
class Component1D:
    """One coordinate law, stored in its final (possibly standardized) form.

    ``shift`` and ``scale`` record the standardization y = (x - shift)/scale
    that was applied to the raw law; (0, 1) means none.
    """

    kind: str
    segments: tuple
    shift: float = 0.0
    scale: float = 1.0
    label: str = ""

    @classmethod
    def gaussian(cls) -> Component1D:
        return cls("gaussian", ((-math.inf, math.inf, -_LOG_SQRT_2PI, 0.0, 1.0),), label="gauss")

    @classmethod
    def uniform(cls, a: float = -math.sqrt(3.0), b: float = math.sqrt(3.0),
                standardize: bool = True) -> Component1D:
        if not b > a:
            raise ValueError("uniform needs a < b")
        return cls._build("uniform", ((a, b, 0.0, 0.0, 0.0),), standardize, "uniform")

    @classmethod
    def two_sided_exponential(cls, rate: float = 1.0, standardize: bool = True) -> Component1D:
        if not rate > 0:
            raise ValueError("rate must be positive")
        segs = ((-math.inf, 0.0, 0.0, rate, 0.0), (0.0, math.inf, 0.0, -rate, 0.0))
        return cls._build("two_sided_exponential", segs, standardize, "dexp")

    @classmethod
    def grid_logdensity(cls, xs, log_density, standardize: bool = True,
                        label: str = "grid") -> Component1D:
        """Piecewise-linear log-density through the samples, -inf outside."""
        xs = np.asarray(xs, dtype=float)
        ld = np.asarray(log_density, dtype=float)
        if xs.ndim != 1 or xs.shape != ld.shape or xs.size < 2:
            raise ValueError("grid needs matching 1-D arrays of at least two samples")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ld))):
            raise ValueError("grid samples must be finite")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("grid x values must be strictly ascending")
        slopes = np.diff(ld) / np.diff(xs)
        if np.any(np.diff(slopes) > 1e-12 * (1.0 + np.abs(slopes[1:]))):
            raise ValueError("log-density is not concave")
        segs = tuple(
            (xs[i], xs[i + 1], ld[i] - slopes[i] * xs[i], slopes[i], 0.0)
            for i in range(xs.size - 1)
        )
        return cls._build("grid_logdensity", segs, standardize, label)

    @classmethod
    def _build(cls, kind, segs, standardize, label):
        segs = tuple(tuple(float(x) for x in s) for s in segs)
        mass, mu, var = _quad_moments(segs)
        if standardize:
            sigma = math.sqrt(var)
            out = cls(kind, _affine_segments(segs, mu, sigma, math.log(mass)), mu, sigma, label)
            m2, mean2, var2 = _quad_moments(out.segments)
            if abs(mean2) > ISOTROPY_TOL or abs(var2 - 1.0) > ISOTROPY_TOL or abs(m2 - 1.0) > ISOTROPY_TOL:
                raise ValueError(f"standardization of {kind} failed: mean {mean2}, var {var2}")
            return out
        # normalize mass only
        return cls(kind, _affine_segments(segs, 0.0, 1.0, math.log(mass)), 0.0, 1.0, label)

    @property
    def symmetric(self) -> bool:
        mirrored = sorted((-v, -u, c0, -c1, k0) for u, v, c0, c1, k0 in self.segments)
        return np.allclose(np.array(mirrored), np.array(sorted(self.segments)), rtol=1e-12, atol=1e-12)

    def logpdf(self, x):
        return _segment_logpdf(self.segments, x)


@dataclass(frozen=True)
class MeasureModel:
    """Gaussian(n) or a product of 1-D components with multiplicities."""

    kind: str
    factors: tuple
    spec: str = ""
    dim: int = field(init=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "product"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        dim = 0
        for comp, mult in self.factors:
            if not isinstance(comp, Component1D) or int(mult) < 1:
                raise ValueError("factors must be (Component1D, multiplicity >= 1)")
            dim += int(mult)
        if dim < 1:
            raise ValueError("model dimension must be >= 1")
        object.__setattr__(self, "dim", dim)

    @classmethod
    def gaussian(cls, n: int) -> MeasureModel:
        return cls("gaussian", ((Component1D.gaussian(), int(n)),), f"gaussian({int(n)})")

    @classmethod
    def product(cls, factors, spec: str = "") -> MeasureModel:
        factors = tuple((c, int(m)) for c, m in factors)
        if not spec:
            spec = "product(" + ",".join(f"{c.label or c.kind}*{m}" for c, m in factors) + ")"
        return cls("product", factors, spec)

    @property
    def components(self) -> tuple:
        return tuple(c for c, _ in self.factors)

    def coord_components(self) -> np.ndarray:
        """Component index of each coordinate."""
        return np.repeat(np.arange(len(self.factors)), [m for _, m in self.factors]).astype(np.intp)

    def segment_table(self):
        """(seg (N,5) float array, offsets (n_components+1,) intp) for the kernels."""
        rows, offsets = [], [0]
        for comp, _ in self.factors:
            rows.extend(comp.segments)
            offsets.append(len(rows))
        return np.ascontiguousarray(rows, dtype=float), np.asarray(offsets, dtype=np.intp)


@dataclass(frozen=True)
class Moments:
    a: np.ndarray
    A: SymMatrix
    log_Z: float
    t: float = 0.0

    def __post_init__(self):
        if self.t > 0:
            lam_max = _lambda_max(self.A.entries)
            if lam_max > 1.0 / self.t + LICHNEROWICZ_TOL:
                raise LichnerowiczViolation(f"lambda_max {lam_max!r} exceeds 1/t = {1.0 / self.t!r}")


def _lambda_max(a):
    if np.count_nonzero(a - np.diag(np.diag(a))) == 0:
        return float(np.max(np.diag(a)))
    return jacobi_spectrum(SymMatrix(a), with_basis=False).max


def _check_args(model, theta, t):
    if not t >= 0 or not math.isfinite(t):
        raise ValueError("t must be finite and >= 0")
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != model.dim:
        raise ValueError(f"theta has length {theta.shape[-1]}, model dim is {model.dim}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    return theta


def tilted_moments_batch(model: MeasureModel, theta, t: float):
    """Barycenters, per-coordinate variances and log-partitions for a batch.

    ``theta`` has shape (..., n); returns (a, var, log_Z) with shapes
    (..., n), (..., n), (...).  For product models the covariance is
    diag(var).
    """
    theta = _check_args(model, theta, t)
    if model.kind == "gaussian":
        s = 1.0 + t
        a = theta / s
        var = np.full(theta.shape, 1.0 / s)
        log_z = 0.5 * np.sum(theta * theta, axis=-1) / s - 0.5 * model.dim * math.log(s)
        return a, var, log_z
    a = np.empty_like(theta)
    var = np.empty_like(theta)
    logs = np.empty_like(theta)
    comp = model.coord_components()
    for k, (c, _) in enumerate(model.factors):
        sel = comp == k
        lz, m, v = mixture_moments(c.segments, theta[..., sel], t)
        a[..., sel] = m
        var[..., sel] = v
        logs[..., sel] = lz
    return a, var, np.sum(logs, axis=-1)


def tilted_moments(model: MeasureModel, theta, t: float) -> Moments:
    """Moments of rho(x) exp(<theta, x> - t|x|^2/2) normalized.

    Raises :class:`DivergentTiltError` ("divergent tilt") when the tilt is not
    integrable, which can only happen at t = 0.
    """
    theta = _check_args(model, theta, t)
    if theta.ndim != 1:
        raise ValueError("theta must be a vector; use tilted_moments_batch")
    a, var, log_z = tilted_moments_batch(model, theta, t)
    return Moments(a, SymMatrix(np.diag(var)), float(log_z), float(t))


@dataclass(frozen=True)
class IsotropyReport:
    passed: bool
    failing: tuple
    max_mean_error: float
    max_var_error: float


def verify_isotropic(model: MeasureModel, tol: float = ISOTROPY_TOL) -> IsotropyReport:
    """Check that the untilted barycenter is 0 and covariance is Id, per coordinate."""
    if tol < 1e-10:
        raise ValueError("tol must be >= 1e-10")
    m = tilted_moments(model, np.zeros(model.dim), 0.0)
    mean_err = np.abs(m.a)
    cov = m.A.entries
    var_err = np.abs(np.diag(cov) - 1.0)
    off = np.abs(cov - np.diag(np.diag(cov))).max(axis=1)
    bad = np.nonzero((mean_err > tol) | (var_err > tol) | (off > tol))[0]
    return IsotropyReport(bad.size == 0, tuple(int(i) for i in bad),
                          float(mean_err.max()), float(var_err.max()))


def poincare_gaussian_check(t: float, moments: Moments) -> bool:
    """Gaussian specialization of the spectral-variance bound: ||A||_op <= 1/t."""
    if not t > 0:
        raise ValueError("t must be positive")
    return _lambda_max(moments.A.entries) <= 1.0 / t + 1e-10


@functools.lru_cache(maxsize=None)
def _standard_component(key: str) -> Component1D:
    if key == "uniform":
        return Component1D.uniform()
    if key == "dexp":
        return Component1D.two_sided_exponential()
    return Component1D.gaussian()


_ITEM = re.compile(r"^(uniform|dexp|gauss|grid:(?P<file>[^*]+))(?:\*(?P<k>\d+))?$")


def parse_model_spec(spec: str, base_dir: str | Path | None = None) -> MeasureModel:
    """Parse ``gaussian(N)`` or ``product(ITEM,...)``.

    ITEM is ``uniform*K``, ``dexp*K``, ``gauss*K`` or ``grid:FILE*K``; ``*K``
    defaults to 1.  Grid files hold two columns ``x log_density``.
    """
    s = "".join(spec.split())
    m = re.fullmatch(r"gaussian\((\d+)\)", s)
    if m:
        n = int(m.group(1))
        if n < 1:
            raise ValueError("gaussian(N) needs N >= 1")
        return MeasureModel.gaussian(n)
    m = re.fullmatch(r"product\((.+)\)", s)
    if not m:
        raise ValueError(f"bad model spec {spec!r}")
    cache: dict[str, Component1D] = {}
    factors = []
    for item in m.group(1).split(","):
        im = _ITEM.match(item)
        if not im:
            raise ValueError(f"bad product item {item!r}")
        k = int(im.group("k") or 1)
        if k < 1:
            raise ValueError(f"multiplicity must be >= 1 in {item!r}")
        key = im.group(1)
        if key not in cache:
            if key in ("uniform", "dexp", "gauss"):
                cache[key] = _standard_component(key)
            else:
                path = Path(im.group("file"))
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                data = np.loadtxt(path, ndmin=2)
                if data.shape[1] != 2:
                    raise ValueError(f"grid file {path} must have two columns")
                cache[key] = Component1D.grid_logdensity(data[:, 0], data[:, 1], label=key)
        factors.append((cache[key], k))
    return MeasureModel.product(factors, spec=f"product({','.join(f'{c.label}*{k}' for c, k in factors)})")
