"""Extended-range real numbers stored on the natural-log scale.

A value is ``sign * exp(L)``.  ``L`` is kept as a 113-bit mpmath float while
``|L| <= 1e300`` (tier 0).  Beyond that the log itself is stored on the log
scale (tower tier): ``L = log_sign * exp(LL)``.  Values like
``exp(-exp(62.5))`` stay in tier 0; ``exp(-exp(8.8e25))`` needs the tower.
Anything deeper raises :class:`TowerOverflowError`.

Only order comparisons and products are exact in the sense that matters for
proof-constant checks: ``mul`` adds logs, ``pow`` scales them.  Addition uses
log-sum-exp; in the tower tier the smaller operand is absorbed.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import mpmath

MP = mpmath.MPContext()
MP.prec = 113

TIER_LIMIT = MP.mpf("1e300")
_LOG_TIER_LIMIT = MP.log(TIER_LIMIT)
_LN2 = MP.log(2)


class TowerOverflowError(OverflowError):
    """Raised when a value would need more than one tower level."""


def mpf(x) -> mpmath.mpf:
    """Coerce ``x`` into the 113-bit context."""
    return MP.mpf(x)


# Signed "log numbers": a log L is represented as (s, tier, mag) where
# tier 0 -> L = s * mag, tier 1 -> L = s * exp(mag).


def _lnum_cmp(a: tuple, b: tuple) -> int:
    sa, ta, ma = a
    sb, tb, mb = b
    if sa != sb:
        return -1 if sa < sb else 1
    if sa == 0:
        return 0
    if ta != tb:
        mag_cmp = -1 if ta < tb else 1
    else:
        mag_cmp = (ma > mb) - (ma < mb)
    return mag_cmp if sa > 0 else -mag_cmp


def _lnum_loglog(x: tuple) -> mpmath.mpf:
    s, tier, mag = x
    return mag if tier else MP.log(mag)


def _lnum_make(sign: int, loglog) -> tuple:
    """Signed log number ``sign * exp(loglog)`` normalized into a tier."""
    if sign == 0:
        return (0, 0, MP.zero)
    if loglog <= _LOG_TIER_LIMIT:
        return (sign, 0, MP.exp(loglog))
    if loglog > TIER_LIMIT:
        raise TowerOverflowError("value exceeds two exponential tiers")
    return (sign, 1, mpf(loglog))


def _lnum_add(a: tuple, b: tuple) -> tuple:
    sa, ta, ma = a
    sb, tb, mb = b
    if sa == 0:
        return b
    if sb == 0:
        return a
    if ta == 0 and tb == 0:
        total = sa * ma + sb * mb
        if abs(total) <= TIER_LIMIT:
            return (int(MP.sign(total)), 0, abs(total))
    la, lb = _lnum_loglog(a), _lnum_loglog(b)
    if la < lb or (la == lb and sa < sb):
        (sa, la), (sb, lb) = (sb, lb), (sa, la)
    diff = lb - la
    if sa == sb:
        return _lnum_make(sa, la + MP.log1p(MP.exp(diff)))
    if diff == 0:
        return (0, 0, MP.zero)
    return _lnum_make(sa, la + MP.log(-MP.expm1(diff)))


@functools.total_ordering
@dataclass(frozen=True, eq=False)
class ExtReal:
    """``sign * exp(L)`` with a tower tier for astronomically large ``|L|``.

    Build values with :meth:`from_float`, :meth:`from_log` or
    :meth:`from_loglog`; the raw constructor does not normalize.
    """

    sign: int
    log_magnitude: mpmath.mpf
    tower: bool = False
    log_sign: int = 0

    # -- construction -----------------------------------------------------
    @classmethod
    def zero(cls) -> ExtReal:
        return cls(0, MP.zero)

    @classmethod
    def one(cls) -> ExtReal:
        return cls(1, MP.zero)

    @classmethod
    def from_float(cls, x) -> ExtReal:
        x = mpf(x)
        if x == 0:
            return cls.zero()
        if not MP.isfinite(x):
            raise ValueError("ExtReal cannot hold inf or nan")
        return cls(int(MP.sign(x)), MP.log(abs(x)))

    @classmethod
    def from_log(cls, log_value, sign: int = 1) -> ExtReal:
        """The value ``sign * exp(log_value)``; ``log_value`` may be ExtReal."""
        if sign == 0:
            return cls.zero()
        if isinstance(log_value, ExtReal):
            return cls._from_lnum(sign, log_value._as_lnum_of_value())
        lv = mpf(log_value)
        if not MP.isfinite(lv):
            if lv < 0:
                return cls.zero()
            raise ValueError("log_value must be finite or -inf")
        if abs(lv) <= TIER_LIMIT:
            return cls(sign, lv)
        return cls(sign, MP.log(abs(lv)), True, int(MP.sign(lv)))

    @classmethod
    def from_loglog(cls, loglog, log_sign: int = -1, sign: int = 1) -> ExtReal:
        """The value ``sign * exp(log_sign * exp(loglog))``."""
        return cls._from_lnum(sign, _lnum_make(log_sign, mpf(loglog)))

    @classmethod
    def _from_lnum(cls, sign: int, lnum: tuple) -> ExtReal:
        s, tier, mag = lnum
        if sign == 0:
            return cls.zero()
        if tier == 0:
            return cls(sign, s * mag)
        return cls(sign, mag, True, s)

    def _lnum(self) -> tuple:
        """The log of ``|self|`` as a signed log number."""
        if self.tower:
            return (self.log_sign, 1, self.log_magnitude)
        L = self.log_magnitude
        return (int(MP.sign(L)), 0, abs(L))

    def _as_lnum_of_value(self) -> tuple:
        """``self`` (not its log) viewed as a signed log number."""
        if self.sign == 0:
            return (0, 0, MP.zero)
        if self.tower:
            raise TowerOverflowError("exp of a tower value exceeds two tiers")
        return _lnum_make(self.sign, self.log_magnitude)

    # -- queries ----------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def log(self) -> ExtReal:
        """``log|self|`` as an ExtReal (one tier down)."""
        if self.sign == 0:
            raise ValueError("log of zero")
        s, tier, mag = self._lnum()
        if s == 0:
            return ExtReal.zero()
        if tier == 0:
            return ExtReal(s, MP.log(mag))
        return ExtReal(s, mag)

    def log_value(self) -> mpmath.mpf:
        """``log|self|`` as an mpf; tower values return signed infinity."""
        if self.sign == 0:
            return MP.ninf
        if self.tower:
            return MP.inf if self.log_sign > 0 else MP.ninf
        return self.log_magnitude

    def log10_float(self) -> float:
        lv = self.log_value()
        if not MP.isfinite(lv):
            return float(lv)
        return float(lv / MP.log(10))

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        lv = self.log_value()
        if lv > 709.8:
            return math.copysign(math.inf, self.sign)
        if lv < -745.2:
            return 0.0 * self.sign
        return float(self.sign * MP.exp(lv))

    def to_mpf(self) -> mpmath.mpf:
        if self.sign == 0:
            return MP.zero
        if self.tower:
            return MP.zero if self.log_sign < 0 else self.sign * MP.inf
        return self.sign * MP.exp(self.log_magnitude)

    # -- arithmetic -------------------------------------------------------
    def __neg__(self) -> ExtReal:
        return ExtReal(-self.sign, self.log_magnitude, self.tower, self.log_sign)

    def __abs__(self) -> ExtReal:
        return ExtReal(abs(self.sign), self.log_magnitude, self.tower, self.log_sign)

    def __mul__(self, other) -> ExtReal:
        other = as_ext(other)
        sign = self.sign * other.sign
        if sign == 0:
            return ExtReal.zero()
        return ExtReal._from_lnum(sign, _lnum_add(self._lnum(), other._lnum()))

    __rmul__ = __mul__

    def __truediv__(self, other) -> ExtReal:
        other = as_ext(other)
        if other.sign == 0:
            raise ZeroDivisionError("ExtReal division by zero")
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> ExtReal:
        return as_ext(other) / self

    def reciprocal(self) -> ExtReal:
        if self.sign == 0:
            raise ZeroDivisionError("reciprocal of zero")
        s, tier, mag = self._lnum()
        return ExtReal._from_lnum(self.sign, (-s, tier, mag))

    def __pow__(self, r) -> ExtReal:
        r = mpf(r)
        if r == 0:
            return ExtReal.one()
        if self.sign <= 0:
            if self.sign == 0 and r > 0:
                return ExtReal.zero()
            raise ValueError("real powers need a positive base")
        s, tier, mag = self._lnum()
        if s == 0:
            return ExtReal.one()
        rs = int(MP.sign(r))
        if tier == 0:
            prod = mag * abs(r)
            if prod <= TIER_LIMIT:
                return ExtReal._from_lnum(1, (s * rs, 0, prod))
            return ExtReal._from_lnum(1, _lnum_make(s * rs, MP.log(mag) + MP.log(abs(r))))
        return ExtReal._from_lnum(1, _lnum_make(s * rs, mag + MP.log(abs(r))))

    def __add__(self, other) -> ExtReal:
        other = as_ext(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        a, b = self, other
        if _lnum_cmp(a._lnum(), b._lnum()) < 0:
            a, b = b, a
        # |a| >= |b|
        if a.tower or b.tower:
            # the smaller term (or the +log 2 of a tie) is below tower precision
            if a.sign != b.sign and _lnum_cmp(a._lnum(), b._lnum()) == 0:
                return ExtReal.zero()
            return a
        d = b.log_magnitude - a.log_magnitude
        if a.sign == b.sign:
            return ExtReal.from_log(a.log_magnitude + MP.log1p(MP.exp(d)), a.sign)
        if d == 0:
            return ExtReal.zero()
        return ExtReal.from_log(a.log_magnitude + MP.log(-MP.expm1(d)), a.sign)

    __radd__ = __add__

    def __sub__(self, other) -> ExtReal:
        return self + (-as_ext(other))

    def __rsub__(self, other) -> ExtReal:
        return as_ext(other) - self

    # -- ordering ---------------------------------------------------------
    def _cmp(self, other) -> int:
        other = as_ext(other)
        if self.sign != other.sign:
            return -1 if self.sign < other.sign else 1
        if self.sign == 0:
            return 0
        c = _lnum_cmp(self._lnum(), other._lnum())
        return c if self.sign > 0 else -c

    def __eq__(self, other) -> bool:
        try:
            return self._cmp(other) == 0
        except (TypeError, ValueError):
            return NotImplemented

    def __lt__(self, other) -> bool:
        return self._cmp(other) < 0

    def __hash__(self) -> int:
        return hash((self.sign, self._lnum()))

    # -- display ----------------------------------------------------------
    def __repr__(self) -> str:
        if self.sign == 0:
            return "ExtReal(0)"
        sgn = "-" if self.sign < 0 else "+"
        if self.tower:
            ls = "-" if self.log_sign < 0 else ""
            return f"ExtReal({sgn}exp({ls}exp({MP.nstr(self.log_magnitude, 17)})))"
        return f"ExtReal({sgn}exp({MP.nstr(self.log_magnitude, 17)}))"

    def to_json(self) -> dict:
        """Plain JSON view; strings keep the full 113-bit digits."""
        if self.tower:
            return {
                "sign": self.sign,
                "tier": "tower",
                "log_sign": self.log_sign,
                "loglog": MP.nstr(self.log_magnitude, 34),
            }
        return {"sign": self.sign, "tier": "log", "log": MP.nstr(self.log_magnitude, 34)}


def as_ext(x) -> ExtReal:
    if isinstance(x, ExtReal):
        return x
    if isinstance(x, (int, float, mpmath.mpf)) or hasattr(x, "__float__"):
        return ExtReal.from_float(x)
    raise TypeError(f"cannot convert {type(x).__name__} to ExtReal")


def ext_exp(x) -> ExtReal:
    """``exp(x)`` for a real or ExtReal exponent."""
    return ExtReal.from_log(x if isinstance(x, ExtReal) else mpf(x))


def ext_mul(a, b) -> ExtReal:
    return as_ext(a) * as_ext(b)


def ext_add(a, b) -> ExtReal:
    return as_ext(a) + as_ext(b)


def ext_cmp(a, b) -> int:
    """Total order: -1, 0 or +1."""
    return as_ext(a)._cmp(as_ext(b))
