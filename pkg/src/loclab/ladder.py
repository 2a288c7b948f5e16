"""Time ladder between p^-8 and the operator-norm regime, and constant checks.

All times are ExtReal.  The backward sequence is iterated on log-log values:
with l_k = log t_k*, the recursion t_{k+1}* = exp(-(t_k*)^(-1/16)) reads

    log|log t_{k+1}*| = -l_k / 16,

so each rung's log-log value is produced by one exact scaling of the
previous log.  That keeps the forward check t_{k+1} = |log t_k|^-16 and the
final-rung identity exact in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath

from loclab.numerics import ExtReal, TowerOverflowError
from loclab.numerics.extreal import MP, TIER_LIMIT, mpf

__all__ = [
    "LadderDepthError",
    "Rung",
    "Ladder",
    "ConstantsReport",
    "RungZeroReport",
    "build_ladder",
    "check_constants",
    "absorption_log_margin",
    "absorption_threshold",
    "window_log_log_n_threshold",
    "induction_targets",
    "final_rung_identity",
    "rung_zero_check",
    "ladder_potentials",
]

MAX_RUNGS = 64
S_BASE = mpf(7) / 3
S_CAP = mpf(15) / 6
READINGS = ("first-entry", "sup")
_LOG16 = MP.log(16)
_LOG_TIER = MP.log(TIER_LIMIT)


class LadderDepthError(OverflowError):
    """The backward sequence left the representable range before reaching t*."""


def _as_log(value=None, log_value=None, loglog_value=None, name="value"):
    """log of a positive quantity given directly, by its log, or by its log-log."""
    given = [v is not None for v in (value, log_value, loglog_value)]
    if sum(given) != 1:
        raise ValueError(f"give exactly one of {name}, log_{name}, log_log_{name}")
    if value is not None:
        v = mpf(value)
        if not v > 0:
            raise ValueError(f"{name} must be positive")
        return MP.log(v)
    if log_value is not None:
        return mpf(log_value)
    return MP.exp(mpf(loglog_value))


@dataclass(frozen=True)
class Rung:
    """t_k as ExtReal, with exact log (if it fits tier 0) and log-log."""

    k: int
    t: ExtReal
    log: mpmath.mpf | None
    loglog: mpmath.mpf

    def to_json(self) -> dict:
        doc = {"k": self.k, "log_log_abs_log_t": MP.nstr(self.loglog, 34)}
        if self.log is not None:
            doc["log_t"] = MP.nstr(self.log, 34)
        else:
            doc["tower"] = self.t.to_json()
        return doc


@dataclass(frozen=True)
class Ladder:
    log_p: mpmath.mpf
    log_n: mpmath.mpf
    C1: float
    t_star: ExtReal
    t1_star: ExtReal
    branch: str
    rungs: tuple = ()
    s: tuple = ()
    reading: str = "first-entry"
    backward: tuple = field(default=(), repr=False)

    @property
    def k0(self) -> int | None:
        return len(self.rungs) if self.branch == "multi_stage" else None

    @property
    def t(self) -> list:
        return [r.t for r in self.rungs]

    @property
    def p(self) -> ExtReal:
        return ExtReal.from_log(self.log_p)

    def forward_check(self) -> list:
        """Residuals of log t_{k+1} = -16 log|log t_k|, rung by rung (0 when exact)."""
        out = []
        for a, b in zip(self.rungs, self.rungs[1:]):
            if b.log is not None:
                out.append(float(abs(b.log + 16 * a.loglog)))
            else:
                # both sides are towers: compare log-log values
                out.append(float(abs(b.loglog - (_LOG16 + MP.log(a.loglog))) / b.loglog))
        return out

    def to_json(self) -> dict:
        return {
            "branch": self.branch,
            "reading": self.reading,
            "k0": self.k0,
            "log_p": MP.nstr(self.log_p, 34),
            "log_n": MP.nstr(self.log_n, 34),
            "C1": self.C1,
            "t_star": self.t_star.to_json(),
            "t1_star": self.t1_star.to_json(),
            "rungs": [r.to_json() for r in self.rungs],
            "s": [float(x) for x in self.s],
        }


def _t_star_log(log_n, C1):
    if not log_n > 0:
        raise ValueError("need n > 1")
    return -MP.log(mpf(C1)) - 2 * MP.log(log_n)


def build_ladder(p=None, n=None, C1: float = 1.0, *, log_p=None, log_n=None, log_log_n=None,
                 reading: str = "first-entry", max_rungs: int = MAX_RUNGS) -> Ladder:
    """Backward sequence t_k* from t_1* = p^-8 until it enters (0, t*].

    ``reading`` picks k0: "first-entry" (default) stops at the first k with
    t_k* <= t*; "sup" is the literal supremum of that set, which is unbounded
    because the sequence keeps decreasing, and raises ValueError.
    """
    if reading not in READINGS:
        raise ValueError(f"reading must be one of {READINGS}")
    lp = _as_log(p, log_p, None, "p")
    ln = _as_log(n, log_n, log_log_n, "n")
    if not lp > MP.log(4):
        raise ValueError("need p > 4")
    if not ln >= MP.log(2):
        raise ValueError("need n >= 2")
    if not C1 > 0:
        raise ValueError("C1 must be positive")
    log_tstar = _t_star_log(ln, C1)
    t_star = ExtReal.from_log(log_tstar)
    l1 = -8 * lp
    t1_star = ExtReal.from_log(l1)
    if t1_star <= t_star:
        return Ladder(lp, ln, float(C1), t_star, t1_star, "single_stage", reading=reading)
    if reading == "sup":
        raise ValueError("k0 unbounded: t_k* keeps decreasing, so sup{k : t_k* <= t*} is infinite")
    back = [Rung(1, t1_star, l1, MP.log(-l1))]
    while back[-1].t > t_star:
        if len(back) >= max_rungs:
            raise LadderDepthError(f"ladder exceeds {max_rungs} rungs without reaching t*")
        prev = back[-1]
        if prev.log is not None:
            loglog = -prev.log / 16
        else:
            # l_k = -exp(LL_k) is beyond tier 0, so LL_{k+1} = exp(LL_k)/16 overflows
            raise LadderDepthError(f"ladder exceeds representable depth at rung {len(back) + 1}")
        if loglog <= prev.loglog:
            raise ValueError("backward sequence does not contract; p is too small")
        try:
            t = ExtReal.from_loglog(loglog, -1)
        except TowerOverflowError as exc:
            raise LadderDepthError(f"ladder exceeds representable depth at rung {len(back) + 1}") from exc
        log = -MP.exp(loglog) if loglog <= _LOG_TIER else None
        back.append(Rung(len(back) + 1, t, log, loglog))
    k0 = len(back)
    # forward index: t_k = t_{k0+1-k}*
    rungs = tuple(Rung(k0 - j, r.t, r.log, r.loglog) for j, r in reversed(list(enumerate(back))))
    # s_1 = 7/3, s_{k+1} = 7/3 + sum_{i=2}^{k+1} |log t_i|^(-1/2)
    s = [S_BASE]
    acc = MP.zero
    for i in range(2, k0):
        acc += MP.exp(-rungs[i - 1].loglog / 2)
        s.append(S_BASE + acc)
    if any(b <= a for a, b in zip(s, s[1:])) and len(s) > 1:
        raise AssertionError("s sequence is not increasing")
    if s and not (S_BASE <= s[0] and s[-1] <= S_CAP):
        raise AssertionError(f"s_(k0-1) = {s[-1]} exceeds 15/6")
    return Ladder(lp, ln, float(C1), t_star, t1_star, "multi_stage", rungs,
                  tuple(float(x) for x in s), reading, tuple(back))


def final_rung_identity(ladder: Ladder) -> dict:
    """exp(-(t_1*)^(-1/8)) = exp(-p), and the k0-1 rung bound matches it.

    Compared in log-log space: log((t_1*)^(-1/8)) = -l_1/8 against log p,
    and 2 log|log t_{k0-1}| against log p.
    """
    lhs = -ladder.backward[0].log / 8 if ladder.backward else -(-8 * ladder.log_p) / 8
    out = {"final": bool(lhs == ladder.log_p), "final_residual": float(abs(lhs - ladder.log_p))}
    if ladder.branch == "multi_stage" and len(ladder.rungs) >= 2:
        ll = ladder.rungs[-2].loglog
        out["k0_minus_1"] = bool(2 * ll == ladder.log_p)
        out["k0_minus_1_residual"] = float(abs(2 * ll - ladder.log_p))
    return out


def induction_targets(p, ladder: Ladder, n=None, *, log_n=None) -> list:
    """[exp(-(log t_k)^2) n for k < k0] + [exp(-p) n], as ExtReal.

    ``p`` may be None to use the ladder's own (exact) log p; n defaults to
    the ladder's n.
    """
    if ladder.branch != "multi_stage":
        raise ValueError("induction targets need a multi_stage ladder")
    lp = ladder.log_p if p is None else _as_log(p, None, None, "p")
    if n is None and log_n is None:
        ln = ladder.log_n
    else:
        ln = _as_log(n, log_n, None, "n")
    n = ExtReal.from_log(ln)
    out = []
    for r in ladder.rungs[:-1]:
        # (log t_k)^2 = exp(2 LL_k)
        out.append(ExtReal.from_loglog(2 * r.loglog, -1) * n)
    out.append(ExtReal.from_loglog(lp, -1) * n)
    return out


# -- constant inequalities -------------------------------------------------

def absorption_log_margin(log_p, C1: float = 1.0) -> mpmath.mpf:
    """-p/20 minus log of e^(1e4 log p + 11p/18) (e^(-2p/3) + e^(-(C1 t_1*)^-1))."""
    lp = mpf(log_p)
    p = ExtReal.from_log(lp)
    pv = p.to_mpf()
    t1 = ExtReal.from_log(-8 * lp)
    inv = (t1 * ExtReal.from_float(C1)).reciprocal()
    a = ExtReal.from_log(-2 * pv / 3)
    try:
        b = ExtReal.from_log(-inv)
    except TowerOverflowError:
        b = ExtReal.zero()  # below two exponential tiers: effectively zero
    lhs = 10_000 * lp + 11 * pv / 18 + (a + b).log_value()
    return -pv / 20 - lhs


def absorption_threshold(C1: float = 1.0, lo=math.log(5.0), hi=60.0, iters: int = 200) -> float:
    """Smallest log p with a non-negative absorption margin, by bisection in log p."""
    lo, hi = mpf(lo), mpf(hi)
    if absorption_log_margin(hi, C1) < 0:
        raise ValueError("no threshold below the bracket")
    if absorption_log_margin(lo, C1) >= 0:
        return float(lo)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if absorption_log_margin(mid, C1) >= 0:
            hi = mid
        else:
            lo = mid
    # round to a double that still passes
    out = float(hi)
    while absorption_log_margin(out, C1) < 0:
        out = math.nextafter(out, math.inf)
    return out


def _window_at(log_n, C1):
    """(value margin at t*, worst derivative margin on the grid), log scale."""
    x_star = -_t_star_log(log_n, C1)  # |log t*|
    c1 = mpf(C1)
    # g(t) = (C1 t)^-1 - 1002|log t| - |log t|^3 at t*, compared as logs
    lhs = 2 * MP.log(log_n)
    rhs = MP.log(1002 * x_star + x_star ** 3)
    value_margin = lhs - rhs
    # d g / d log t <= 0  <=>  (C1 t)^-1 >= 1002 + 3 (log t)^2 ; grid over
    # three decades of |log t| from |log t*|, 1000 points per decade
    worst = None
    for j in range(3001):
        x = x_star * mpf(10) ** (mpf(j) / 1000)
        m = (x - MP.log(c1)) - MP.log(1002 + 3 * x * x)
        worst = m if worst is None or m < worst else worst
    return value_margin, worst


def window_log_log_n_threshold(C1: float = 1.0, lo=0.0, hi=50.0, iters: int = 100) -> float:
    """Smallest log log n for which the small-time window inequality holds at t* (bisection)."""
    lo, hi = mpf(lo), mpf(hi)

    def ok(ll):
        ln = MP.exp(ll)
        if -_t_star_log(ln, C1) <= 0:
            return False
        v = 2 * MP.log(ln) - MP.log(1002 * (-_t_star_log(ln, C1)) + (-_t_star_log(ln, C1)) ** 3)
        return v >= 0

    if not ok(hi):
        raise ValueError("no threshold below the bracket")
    for _ in range(iters):
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


@dataclass(frozen=True)
class ConstantsReport:
    entries: dict
    thresholds: dict

    @property
    def passed(self) -> bool:
        return all(e["passed"] for e in self.entries.values())

    def to_json(self) -> dict:
        return {"passed": self.passed, "entries": self.entries, "thresholds": self.thresholds}


def check_constants(p=None, n=None, C1: float = 1.0, *, log_p=None, log_n=None,
                    log_log_n=None, thresholds: bool = True) -> ConstantsReport:
    """Log-space margins (>= 0 means pass) for the three constant inequalities.

    absorption: e^(1e4 log p + 11p/18) (e^(-2p/3) + e^(-(C1 t_1*)^-1)) <= e^(-p/20);
    window: (C1 t)^-1 - 1002 |log t| >= |log t|^3 on (0, t*], checked at t*
    plus the sign of its derivative on a log grid;
    start_time: t_1* = p^-8 <= e^-1000.
    """
    lp = _as_log(p, log_p, None, "p")
    ln = _as_log(n, log_n, log_log_n, "n")
    m_abs = absorption_log_margin(lp, C1)
    entries = {"absorption": {"passed": bool(m_abs >= 0), "log_margin": float(m_abs)}}
    if -_t_star_log(ln, C1) > 0:
        v_win, d_win = _window_at(ln, C1)
        entries["window"] = {"passed": bool(v_win >= 0 and d_win >= 0),
                           "log_margin_at_t_star": float(v_win),
                           "min_log_derivative_margin": float(d_win)}
    else:
        entries["window"] = {"passed": False, "log_margin_at_t_star": float("-inf"),
                           "min_log_derivative_margin": float("-inf"),
                           "note": "t* >= 1: (0, t*] leaves the small-time regime"}
    m_start = 8 * lp - 1000
    entries["start_time"] = {"passed": bool(m_start >= 0), "log_margin": float(m_start)}
    th = {}
    if thresholds:
        th = {
            "absorption_log_p": absorption_threshold(C1),
            "window_log_log_n": window_log_log_n_threshold(C1),
            "start_time_log_p": 125.0,
        }
    return ConstantsReport(entries, th)


@dataclass(frozen=True)
class RungZeroReport:
    passed: bool
    terms: dict

    def to_json(self) -> dict:
        return {"passed": self.passed, "terms": self.terms}


def _ext_json(x: ExtReal) -> dict:
    return x.to_json()


def rung_zero_check(t1: ExtReal, D0=None, C1: float = 1.0, n=None, *, log_n=None) -> RungZeroReport:
    """exp(1000|log t1| - D0/3) n + exp(-(C1 t1)^-1 + 1002|log t1|) n <= exp(-|log t1|^2) n.

    D0 defaults to |log t1|^4.  The second term is also compared with
    exp(-|log t1|^3), the intermediate bound it is replaced by.
    """
    if t1 > ExtReal.from_log(-1000):
        raise ValueError("regime: t1 must be <= e^-1000")
    x = abs(t1.log())
    D0 = x ** 4 if D0 is None else ExtReal.from_float(D0) if not isinstance(D0, ExtReal) else D0
    n = ExtReal.one() if n is None and log_n is None else ExtReal.from_log(_as_log(n, log_n, None, "n"))
    e1 = ExtReal.from_float(1000) * x - D0 / ExtReal.from_float(3)
    term1 = ExtReal.from_log(e1) * n
    inv = (t1 * ExtReal.from_float(C1)).reciprocal()
    try:
        term2 = ExtReal.from_log(ExtReal.from_float(1002) * x - inv) * n
    except TowerOverflowError:
        term2 = ExtReal.zero()
    cube = ExtReal.from_log(-(x ** 3)) * n
    rhs = ExtReal.from_log(-(x ** 2)) * n
    passed = bool(term1 + cube <= rhs and term2 <= cube)
    return RungZeroReport(passed, {
        "term1": _ext_json(term1),
        "term2": _ext_json(term2),
        "term2_bound": _ext_json(cube),
        "rhs": _ext_json(rhs),
    })


def ladder_potentials(ladder: Ladder, grid_points: int = 10_000) -> list:
    """f_k with (r0 = s_k, D0 = |log t_k|^4) for k < k0, then f_k0 with (8/3, p)."""
    from loclab.potentials import build_potential

    if ladder.branch != "multi_stage":
        raise ValueError("potentials need a multi_stage ladder")
    pots = []
    for r, s in zip(ladder.rungs[:-1], ladder.s):
        d0 = float(ExtReal.from_log(4 * r.loglog))  # inf when beyond float range
        pots.append(build_potential(d0, s, grid_points))
    pots.append(build_potential(float(ladder.p), 8.0 / 3.0, grid_points))
    return pots
