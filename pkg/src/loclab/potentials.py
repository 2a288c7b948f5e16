"""Exponential-to-quadratic test potentials, F_t, Gronwall envelopes, handoff.

f(r) = exp(D0 (r - r0))   for r <= L = r0 - 1/D0,
f(r) = b r^2              for r >= r0,
and a polynomial bridge in between.  The bridge is built in the scaled
coordinate x = D0 (r - L) in [0, 1], where F(x) = f(r) turns the curvature
condition |f''| <= D0^2 f into |F''| <= F and monotonicity into F' > 0.

Two bridges are tried in order:

* quintic Hermite in x matching value, slope and curvature at both ends, with
  b scanned over [1/20, 1/5] for the largest constraint slack;
* if that does not certify, F = H_b + (x(1-x))^4 Q(x) with H_b a degree-7
  Hermite interpolant and Q of degree 5; b and Q are chosen by a linear
  program that maximizes a weighted slack.  Third derivatives match too, so
  the junctions are C^3.

Every returned potential has passed :func:`certify`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import mpmath
import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import linprog

from loclab.numerics import ExtReal

__all__ = [
    "ConstructionInfeasible",
    "Potential",
    "HandoffReport",
    "build_potential",
    "certify",
    "eval_F",
    "log_eval_F",
    "gronwall_log_factor",
    "gronwall_envelope",
    "handoff_check",
    "fd_junction_residuals",
    "junction_residuals",
]

B_MIN, B_MAX = 1.0 / 20.0, 1.0 / 5.0
R0_MIN, R0_MAX = 7.0 / 3.0, 8.0 / 3.0
JUNCTION_RTOL = 1e-8
FD_STEP = 1e-5
FD_RTOL = 1e-6
_E1 = math.exp(-1.0)
_Q_DEGREE = 5
# derivative order matched at both ends of the polynomial bridge; matching
# through the fourth derivative keeps junction second differences at the
# size they would have for the pure exponential
_SMOOTH = 4
_LP_GRID = np.unique(np.concatenate([
    np.linspace(0.0, 1.0, 801),
    np.geomspace(1e-4, 0.1, 60),
    1.0 - np.geomspace(1e-4, 0.1, 60),
]))


class ConstructionInfeasible(RuntimeError):
    """No bridge satisfied the constraints."""


def _hermite(values):
    """Ascending coefficients of the polynomial on [0, 1] with the given end data.

    ``values`` = (y0, y0', y0'', ..., y1, y1', y1'', ...), same count per end.
    """
    k = len(values) // 2
    deg = 2 * k - 1
    rows, rhs = [], []
    for end, data in ((0.0, values[:k]), (1.0, values[k:])):
        for d in range(k):
            row = np.zeros(deg + 1)
            for j in range(d, deg + 1):
                row[j] = math.perm(j, d) * end ** (j - d)
            rows.append(row)
            rhs.append(data[d])
    return np.linalg.solve(np.array(rows), np.array(rhs))


def _right_data(r0, D0, b=1.0, order=3):
    """Scaled F and its derivatives through ``order`` at x = 1 for f = b r^2."""
    w = 0.0 if math.isinf(D0) else 1.0 / D0
    return (b * r0 * r0, 2.0 * b * r0 * w, 2.0 * b * w * w) + (0.0,) * (order - 2)


def _poly_eval(c, x, d=0):
    return P.polyval(x, P.polyder(c, d) if d else c)


def _taylor_at_one(c):
    """Coefficients of the same polynomial in powers of (x - 1)."""
    n = len(c)
    return np.array([math.fsum(math.comb(j, k) * c[j] for j in range(k, n)) for k in range(n)])


def _split(coef, D0, r0, b, order):
    """Bridge as expansions about x = 0 and x = 1 with exact junction data.

    The Taylor coefficients through ``order`` are overwritten by the exact
    values the outer pieces demand, so junction derivatives are not polluted
    by cancellation when F''(1) ~ 1/D0^2 is tiny.
    """
    left = np.array(coef, dtype=float)
    right = _taylor_at_one(left)
    rd = _right_data(r0, D0, b, max(order, 2))
    for k in range(order + 1):
        left[k] = _E1 / math.factorial(k)
        right[k] = rd[k] / math.factorial(k)
    return left, right


@dataclass(frozen=True)
class Potential:
    """The test potential; ``bridge`` holds power coefficients in x about 0.

    ``bridge_right`` is the same polynomial about x = 1 (used for x > 1/2).
    D0 = inf is the limit potential: 0 below r0 and b r^2 from r0 on.
    """

    D0: float
    r0: float
    b: float
    bridge: np.ndarray = field(repr=False)
    bridge_right: np.ndarray = field(repr=False)
    kind: str = "quintic"
    junction_order: int = 2
    grid_cert: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def left(self) -> float:
        return self.r0 if math.isinf(self.D0) else self.r0 - 1.0 / self.D0

    def bridge_eval(self, x, d: int = 0):
        """d-th derivative of the bridge polynomial at scaled x."""
        x = np.asarray(x, dtype=float)
        near = x <= 0.5
        out = np.empty_like(x)
        out[near] = _poly_eval(self.bridge, x[near], d)
        out[~near] = _poly_eval(self.bridge_right, x[~near] - 1.0, d)
        return out

    def derivative(self, r, d: int = 0):
        """d-th derivative of f at r (d = 0, 1, 2)."""
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        quad = r >= self.r0
        expo = (r <= self.left) & ~quad
        mid = ~(quad | expo)
        rq = r[quad]
        out[quad] = (self.b * rq * rq, 2.0 * self.b * rq, np.full_like(rq, 2.0 * self.b))[d]
        if math.isinf(self.D0):
            out[expo] = 0.0
        else:
            out[expo] = self.D0 ** d * np.exp(self.D0 * (r[expo] - self.r0))
            out[mid] = self.D0 ** d * self.bridge_eval(self.D0 * (r[mid] - self.left), d)
        return out

    def __call__(self, r):
        return self.derivative(r, 0)

    def curvature_ratio(self, r):
        """f''/(D0^2 f); the curvature condition is |ratio| <= 1."""
        r = np.asarray(r, dtype=float)
        out = np.ones_like(r)
        quad = r >= self.r0
        mid = (r > self.left) & ~quad
        out[quad] = 0.0 if math.isinf(self.D0) else 2.0 / (self.D0 ** 2 * r[quad] ** 2)
        if np.any(mid):
            x = self.D0 * (r[mid] - self.left)
            out[mid] = self.bridge_eval(x, 2) / self.bridge_eval(x)
        return out

    def log_derivative(self, r):
        """f'/f; positive everywhere iff f is increasing."""
        r = np.asarray(r, dtype=float)
        out = np.full_like(r, self.D0)
        quad = r >= self.r0
        mid = (r > self.left) & ~quad
        out[quad] = 2.0 / r[quad]
        if np.any(mid):
            x = self.D0 * (r[mid] - self.left)
            out[mid] = self.D0 * self.bridge_eval(x, 1) / self.bridge_eval(x)
        return out

    def certificate(self) -> dict:
        doc = {
            "D0": self.D0 if math.isfinite(self.D0) else "inf",
            "r0": self.r0,
            "b": self.b,
            "bridge_kind": self.kind,
            "bridge_coefficients": [float(c) for c in self.bridge],
        }
        doc.update(self.grid_cert)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.certificate(), indent=2, sort_keys=True)


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def junction_residuals(pot: Potential) -> dict:
    """Max relative mismatch of (f, f', f'') between the one-sided pieces."""
    rd = _right_data(pot.r0, pot.D0, pot.b)
    out = {}
    for name, x0, exact in (("left", 0.0, (_E1, _E1, _E1)), ("right", 1.0, rd[:3])):
        got = [float(pot.bridge_eval(np.array([x0]), d)[0]) for d in range(3)]
        out[name] = max(_rel(a, c) for a, c in zip(exact, got))
    return out


def fd_junction_residuals(pot: Potential, h: float = FD_STEP, scaled: bool = True) -> dict:
    """Central second differences straddling each junction.

    The residual is |D2 f - f''| / (D0^2 f) at the junction, i.e. measured
    on the scale that the curvature bound uses.  Evaluated in 113-bit
    arithmetic so only truncation error remains.  With ``scaled`` the step is
    h in x = D0 (r - L), which is h/D0 in r; otherwise it is h in r.
    """
    if math.isinf(pot.D0):
        raise ValueError("the limit potential has no bridge")
    with mpmath.workprec(113):
        b = mpmath.mpf(pot.b)
        r0 = mpmath.mpf(pot.r0)
        D0 = mpmath.mpf(pot.D0)
        # junction coefficients are exact by construction; only the free
        # higher-order ones come from the float representation
        k0 = pot.junction_order + 1
        exact_l = [mpmath.exp(-1) / mpmath.factorial(k) for k in range(k0)]
        exact_r = ([b * r0 * r0, 2 * b * r0 / D0, b / (D0 * D0)] + [mpmath.mpf(0)] * k0)[:k0]
        cl = (exact_l[:k0] + [mpmath.mpf(float(c)) for c in pot.bridge[k0:]])[::-1]
        cr = (exact_r[:k0] + [mpmath.mpf(float(c)) for c in pot.bridge_right[k0:]])[::-1]

        def F(x):
            if x <= 0:
                return mpmath.exp(x - 1)
            if x >= 1:
                rr = r0 + (x - 1) / D0
                return b * rr * rr
            return mpmath.polyval(cl, x) if x <= 0.5 else mpmath.polyval(cr, x - 1)

        hx = mpmath.mpf(h) if scaled else mpmath.mpf(h) * D0
        out = {}
        for name, x0, exact in (("left", 0, mpmath.exp(-1)), ("right", 1, 2 * b / (D0 * D0))):
            x0 = mpmath.mpf(x0)
            fd = (F(x0 + hx) - 2 * F(x0) + F(x0 - hx)) / (hx * hx)
            out[name] = float(abs(fd - exact) / F(x0))
    return out


def certify(pot: Potential, grid_points: int = 10_000) -> dict:
    """Grid certificate: monotonicity, curvature bound, C^2 junctions.

    The grid is ``grid_points`` uniform points on [0, 10 r0], 1000 points
    across the bridge and both junction points.  Curvature slack is reported
    in normalized form 1 - |f''|/(D0^2 f), which is exactly 0 on the
    exponential piece.
    """
    r = np.linspace(0.0, 10.0 * pot.r0, grid_points)
    r = np.concatenate([r, [pot.left, pot.r0]])
    slack = 1.0 - np.abs(pot.curvature_ratio(r))
    logd = pot.log_derivative(r)
    b_ok = B_MIN <= pot.b <= B_MAX
    if math.isinf(pot.D0):
        min_slack, min_logd = float(slack.min()), float(logd.min())
        return {
            "grid_points": int(grid_points),
            "min_curvature_slack": min_slack,
            "min_log_derivative": min_logd,
            "junction_residuals": None,
            "fd_junction_residuals": None,
            "passed": bool(b_ok and min_slack >= 0.0 and min_logd > 0.0),
        }
    # bridge points in scaled form; float r cannot resolve a 1/D0 interval
    x = np.linspace(0.0, 1.0, 1000)
    F = pot.bridge_eval(x)
    slack_x = 1.0 - np.abs(pot.bridge_eval(x, 2)) / F
    logd_x = pot.bridge_eval(x, 1) / F
    junction = junction_residuals(pot)
    fd = fd_junction_residuals(pot)
    min_slack = float(min(slack.min(), slack_x.min()))
    min_logd = float(min(logd.min(), logd_x.min()))
    return {
        "grid_points": int(grid_points),
        "min_curvature_slack": min_slack,
        "min_log_derivative": min_logd,
        "junction_residuals": junction,
        "fd_junction_residuals": fd,
        "passed": bool(b_ok and min_slack >= 0.0 and min_logd > 0.0 and F.min() > 0.0
                       and max(junction.values()) <= JUNCTION_RTOL
                       and max(fd.values()) <= FD_RTOL),
    }


def _weighted_slack(c, x):
    F = _poly_eval(c, x)
    F2 = _poly_eval(c, x, 2)
    F1 = _poly_eval(c, x, 1)
    return min(((F - F2)[x > 0] / x[x > 0]).min(), (F + F2).min(), (F1[x < 1] / (1 - x[x < 1]) ** 2).min())


def _quintic(D0, r0, n_scan=301):
    left = _hermite((_E1, _E1, _E1, 0.0, 0.0, 0.0))
    unit = _hermite((0.0, 0.0, 0.0) + _right_data(r0, D0)[:3])
    best = None
    for b in np.linspace(B_MIN, B_MAX, n_scan):
        c = left + b * unit
        s = _weighted_slack(c, _LP_GRID)
        if best is None or s > best[0]:
            best = (s, float(b), c)
    return best


def _lp_bridge(D0, r0):
    m = _SMOOTH
    left = _hermite((_E1,) * (m + 1) + (0.0,) * (m + 1))
    unit = _hermite((0.0,) * (m + 1) + _right_data(r0, D0, 1.0, m))
    bump = P.polypow([0.0, 1.0, -1.0], m + 1)  # leaves the end data untouched
    cols = [unit] + [P.polymul(bump, [0.0] * j + [1.0]) for j in range(_Q_DEGREE + 1)]
    x = _LP_GRID[(_LP_GRID > 0) & (_LP_GRID < 1)]
    n_var = len(cols) + 1

    def block(d):
        return np.column_stack([_poly_eval(c, x, d) for c in cols]), _poly_eval(left, x, d)

    V0, f0 = block(0)
    V1, f1 = block(1)
    V2, f2 = block(2)
    z = np.zeros((x.size, 1))
    # F - F'' >= tau x^2 ; F + F'' >= tau ; F' >= tau (1-x)^3
    A = np.vstack([
        np.hstack([-(V0 - V2), z + (x * x)[:, None]]),
        np.hstack([-(V0 + V2), z + 1.0]),
        np.hstack([-V1, z + ((1 - x) ** 3)[:, None]]),
    ])
    rhs = np.concatenate([f0 - f2, f0 + f2, f1])
    cost = np.zeros(n_var)
    cost[-1] = -1.0
    bounds = [(B_MIN, B_MAX)] + [(None, None)] * (len(cols) - 1) + [(None, 1.0)]
    res = linprog(cost, A_ub=A, b_ub=rhs, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    coef = left
    for q, c in zip(res.x[:-1], cols):
        coef = P.polyadd(coef, q * c)
    return float(res.x[-1]), float(res.x[0]), coef


def build_potential(D0: float, r0: float, grid_points: int = 10_000) -> Potential:
    """Construct and certify the potential for (D0, r0).

    D0 may be ``inf`` (limit potential: 0 below r0, b r^2 above).  Raises
    ValueError outside D0 > 4, r0 in [7/3, 8/3], and
    :class:`ConstructionInfeasible` if no bridge certifies.
    """
    D0 = float(D0)
    r0 = float(r0)
    if not D0 > 4.0:
        raise ValueError("D0 must exceed 4")
    if not (R0_MIN - 1e-15 <= r0 <= R0_MAX + 1e-15):
        raise ValueError("r0 must lie in [7/3, 8/3]")
    if grid_points < 1000:
        raise ValueError("grid_points must be >= 1000")
    tried = []
    if math.isfinite(D0):
        s, b, c = _quintic(D0, r0)
        if s > 0:
            pot = Potential(D0, r0, b, *_split(c, D0, r0, b, 2), "quintic", 2)
            cert = certify(pot, grid_points)
            if cert["passed"]:
                return replace(pot, grid_cert=cert)
            tried.append(f"quintic (slack {s:.3g}) failed certification")
        else:
            tried.append(f"quintic infeasible (best slack {s:.3g})")
    lp = _lp_bridge(D0, r0)
    if lp is not None and lp[0] > 0:
        tau, b, c = lp
        kind = "limit" if math.isinf(D0) else f"lp-degree-{len(c) - 1}"
        pot = Potential(D0, r0, b, *_split(c, D0, r0, b, _SMOOTH), kind, _SMOOTH)
        cert = certify(pot, grid_points)
        if cert["passed"]:
            return replace(pot, grid_cert=cert)
        tried.append("polynomial bridge failed certification")
    else:
        tried.append("polynomial bridge LP infeasible")
    raise ConstructionInfeasible("construction infeasible: " + "; ".join(tried))


def eval_F(pot: Potential, eigenvalues) -> float:
    """F = sum_i f(lambda_i)."""
    lam = np.asarray(eigenvalues, dtype=float)
    if not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise ValueError("eigenvalues must be finite and >= 0")
    return math.fsum(pot(lam.ravel()))


def log_eval_F(pot: Potential, eigenvalues) -> float:
    """log F, exact where f underflows (exponential piece handled in logs)."""
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    if not np.all(np.isfinite(lam)) or np.any(lam < 0):
        raise ValueError("eigenvalues must be finite and >= 0")
    logs = np.empty_like(lam)
    expo = lam <= pot.left
    expo &= lam < pot.r0
    logs[expo] = -np.inf if math.isinf(pot.D0) else pot.D0 * (lam[expo] - pot.r0)
    logs[~expo] = np.log(pot(lam[~expo]))
    top = logs.max()
    if top == -np.inf:
        return -math.inf
    return float(top + math.log(math.fsum(np.exp(logs - top))))


def _mp_log(t):
    if isinstance(t, ExtReal):
        if t.sign <= 0:
            raise ValueError("times must be positive")
        return t.log_value()
    t = mpmath.mpf(t)
    if t <= 0:
        raise ValueError("times must be positive")
    return mpmath.log(t)


def gronwall_log_factor(D0, t1, t2):
    """log of (t2/t1)^500 exp(288 sqrt(3) D0^2 (sqrt(t2) - sqrt(t1))), as an mpf."""
    with mpmath.workprec(113):
        l1, l2 = _mp_log(t1), _mp_log(t2)
        if l1 > l2:
            raise ValueError("need t1 <= t2")
        if l2 > 0:
            raise ValueError("need t2 <= 1")
        d0 = mpmath.mpf(D0)
        return 500 * (l2 - l1) + 288 * mpmath.sqrt(3) * d0 * d0 * (mpmath.exp(l2 / 2) - mpmath.exp(l1 / 2))


def gronwall_envelope(D0, t1, t2) -> ExtReal:
    """Growth factor bounding E F_{t2} / E F_{t1}; 0 < t1 <= t2 <= 1."""
    if not isinstance(t1, ExtReal) and float(t1) == 0.0:
        raise ValueError("t1 = 0: the envelope diverges")
    return ExtReal.from_log(gronwall_log_factor(D0, t1, t2))


@dataclass(frozen=True)
class HandoffReport:
    passed: bool
    worst_margin: float
    worst_lambda: float
    band: str

    def to_json(self) -> dict:
        return {"passed": self.passed, "worst_margin": self.worst_margin,
                "worst_lambda": self.worst_lambda, "band": self.band}


def handoff_check(pot_next: Potential, b_prev: float, s_prev: float,
                  grid_points: int = 10_000) -> HandoffReport:
    """Pointwise f_next(l) <= 6 b_prev l^2 on (s_prev, 8/3] and <= 4 b_prev l^2 above.

    Margins are relative: 1 - f_next(l)/(c b_prev l^2).
    """
    if not (R0_MIN - 1e-15 <= s_prev <= R0_MAX + 1e-15):
        raise ValueError("s_prev must lie in [7/3, 8/3]")
    if not (B_MIN - 1e-15 <= b_prev <= B_MAX + 1e-15):
        raise ValueError("b_prev must lie in [1/20, 1/5]")
    top = R0_MAX
    lam = np.linspace(s_prev, 20.0, grid_points)[1:]
    extra = [top, np.nextafter(s_prev, np.inf), pot_next.r0]
    if math.isfinite(pot_next.D0):
        extra.extend(pot_next.left + np.linspace(0.0, 1.0, 200) / pot_next.D0)
    lam = np.unique(np.concatenate([lam, np.asarray(extra, dtype=float)]))
    lam = lam[(lam > s_prev) & (lam <= 20.0)]
    c = np.where(lam <= top, 6.0, 4.0)
    margin = 1.0 - pot_next(lam) / (c * b_prev * lam * lam)
    i = int(np.argmin(margin))
    band = "middle" if lam[i] <= top else "upper"
    return HandoffReport(bool(margin[i] > 0.0), float(margin[i]), float(lam[i]), band)
