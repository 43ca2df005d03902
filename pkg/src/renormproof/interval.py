"""Multi-precision intervals and complex rectangles with outward rounding.

Endpoints are MPFR binary floating-point numbers (through :mod:`gmpy2`).
Directed rounding is realised by evaluating each lower endpoint in a
round-toward-minus-infinity context and each upper endpoint in a
round-toward-plus-infinity context.  MPFR operations are correctly rounded,
so the returned endpoints are the tightest representable outward bounds of
each elementary operation.

Rounding state is never global: an :class:`ArithContext` owns its own
immutable set of MPFR contexts and every operation goes through one.  The
operators on :class:`Interval` and :class:`Rectangle` use the context made
current with :func:`local_context` (a :mod:`contextvars` variable, so each
thread or task sees its own).
"""

from __future__ import annotations

import contextvars
import math
from contextlib import contextmanager
from fractions import Fraction
from functools import lru_cache
from numbers import Integral

import gmpy2
from gmpy2 import mpfr, mpz

__all__ = [
    "ArithContext",
    "Interval",
    "Rectangle",
    "EMPTY",
    "IntervalError",
    "EmptyIntervalError",
    "IntervalZeroDivisionError",
    "IntervalOverflowError",
    "get_context",
    "set_context",
    "local_context",
    "exact_decimal",
    "bits_for_digits",
]


class IntervalError(ArithmeticError):
    """Base class for failures of validated arithmetic."""


class EmptyIntervalError(IntervalError):
    """Arithmetic was attempted on the empty interval."""


class IntervalZeroDivisionError(IntervalError, ZeroDivisionError):
    """The divisor encloses zero."""


class IntervalOverflowError(IntervalError, OverflowError):
    """An endpoint would overflow or become NaN."""


def bits_for_digits(digits: int) -> int:
    """Binary precision matching ``digits`` decimal significand digits."""
    return math.ceil(digits * math.log2(10))


@lru_cache(maxsize=None)
def _mpfr_contexts(precision: int):
    traps = dict(trap_overflow=True, trap_invalid=True, trap_divzero=True)
    down = gmpy2.context(precision=precision, round=gmpy2.RoundDown, **traps)
    up = gmpy2.context(precision=precision, round=gmpy2.RoundUp, **traps)
    near = gmpy2.context(precision=precision, round=gmpy2.RoundToNearest, **traps)
    # wide enough that the product of two working-precision numbers is exact
    exact = gmpy2.context(precision=2 * precision + 8, round=gmpy2.RoundToNearest, **traps)
    return down, up, near, exact


@lru_cache(maxsize=None)
def _sized(precision: int):
    return gmpy2.context(precision=precision, round=gmpy2.RoundToNearest)


def neg(x: mpfr) -> mpfr:
    """Exact ``-x``.  Python's unary minus rounds to the global gmpy2 context."""
    return _sized(x.precision).minus(x)


def fabs(x: mpfr) -> mpfr:
    """Exact ``|x|``."""
    return _sized(x.precision).abs(x)


def _exact_mpfr(x) -> mpfr:
    """Convert ``x`` to an mpfr without any rounding, or raise."""
    if isinstance(x, type(mpfr(0))):
        if not gmpy2.is_finite(x):
            raise IntervalOverflowError(f"non-finite endpoint {x}")
        return x
    if isinstance(x, bool):
        x = int(x)
    if isinstance(x, Integral):
        x = int(x)
        return mpfr(x, max(53, x.bit_length() + 1))
    if isinstance(x, float):
        if not math.isfinite(x):
            raise IntervalOverflowError(f"non-finite endpoint {x}")
        return mpfr(x, 53)
    raise TypeError(f"cannot convert {type(x).__name__} exactly; use ArithContext.convert")


class ArithContext:
    """Immutable arithmetic context: binary precision plus outward rounding.

    Parameters
    ----------
    precision : int
        Significand size in bits, at least 53.
    """

    __slots__ = ("_precision", "down", "up", "near", "exact")

    def __init__(self, precision: int = 132):
        precision = int(precision)
        if precision < 53:
            raise ValueError("precision must be at least 53 bits")
        object.__setattr__(self, "_precision", precision)
        down, up, near, exact = _mpfr_contexts(precision)
        object.__setattr__(self, "down", down)
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "near", near)
        object.__setattr__(self, "exact", exact)

    @classmethod
    def from_digits(cls, digits: int) -> "ArithContext":
        return cls(bits_for_digits(digits))

    @property
    def precision(self) -> int:
        return self._precision

    def __setattr__(self, name, value):
        raise AttributeError("ArithContext is immutable")

    def __reduce__(self):
        return (ArithContext, (self._precision,))

    def __eq__(self, other):
        return isinstance(other, ArithContext) and other._precision == self._precision

    def __hash__(self):
        return hash(("ArithContext", self._precision))

    def __repr__(self):
        return f"ArithContext(precision={self._precision})"

    # -- conversion -------------------------------------------------------

    def _round_pair(self, value):
        """Outward-rounded (lo, hi) mpfr enclosure of a real ``value``."""
        if isinstance(value, str):
            with self.down:
                lo = mpfr(value)
            with self.up:
                hi = mpfr(value)
            if not (gmpy2.is_finite(lo) and gmpy2.is_finite(hi)):
                raise IntervalOverflowError(f"cannot parse {value!r} as a finite real")
            return lo, hi
        if isinstance(value, Fraction):
            num = _exact_mpfr(value.numerator)
            den = _exact_mpfr(value.denominator)
            return self.down.div(num, den), self.up.div(num, den)
        x = _exact_mpfr(value)
        return self.down.plus(x), self.up.plus(x)

    def convert(self, value, hi=None) -> "Interval":
        """Enclose ``value`` (or ``[value, hi]``) at this context's precision.

        Accepts intervals, ints, floats, Fractions, mpfr numbers and decimal
        strings.  Rationals and strings that are not representable are
        rounded outward.
        """
        if hi is not None:
            lo_i = self.convert(value)
            hi_i = self.convert(hi)
            return Interval(lo_i.lo, hi_i.hi)
        if isinstance(value, Interval):
            value._check()
            if value.lo.precision <= self._precision and value.hi.precision <= self._precision:
                return value
            return Interval(self.down.plus(value.lo), self.up.plus(value.hi))
        lo, hi_ = self._round_pair(value)
        return Interval(lo, hi_)

    def point(self, value) -> mpfr:
        """Round ``value`` to nearest at working precision (non-rigorous)."""
        if isinstance(value, str):
            with self.near:
                return mpfr(value)
        if isinstance(value, Fraction):
            return self.near.div(_exact_mpfr(value.numerator), _exact_mpfr(value.denominator))
        return self.near.plus(_exact_mpfr(value))

    # -- interval arithmetic ---------------------------------------------

    def add(self, a: "Interval", b: "Interval") -> "Interval":
        a, b = self._args(a, b)
        return Interval(self.down.add(a.lo, b.lo), self.up.add(a.hi, b.hi))

    def sub(self, a: "Interval", b: "Interval") -> "Interval":
        a, b = self._args(a, b)
        return Interval(self.down.sub(a.lo, b.hi), self.up.sub(a.hi, b.lo))

    def neg(self, a: "Interval") -> "Interval":
        a._check()
        return Interval(neg(a.hi), neg(a.lo))

    def mul(self, a: "Interval", b: "Interval") -> "Interval":
        a, b = self._args(a, b)
        lo, hi = mul_endpoints(self.down, self.up, a.lo, a.hi, b.lo, b.hi)
        return Interval(lo, hi)

    def div(self, a: "Interval", b: "Interval") -> "Interval":
        a, b = self._args(a, b)
        if b.lo <= 0 <= b.hi:
            raise IntervalZeroDivisionError(f"divisor {b} contains zero")
        d, u = self.down, self.up
        los = [d.div(x, y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
        his = [u.div(x, y) for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
        return Interval(min(los), max(his))

    def inv(self, a: "Interval") -> "Interval":
        return self.div(Interval(1), a)

    def pow(self, a: "Interval", n: int) -> "Interval":
        """Tight enclosure of ``{x**n : x in a}`` for an integer ``n >= 0``."""
        a._check()
        n = int(n)
        if n < 0:
            raise ValueError("only non-negative integer powers are supported")
        if n == 0:
            return Interval(1)
        d, u = self.down, self.up
        if n % 2 == 1:
            return Interval(self._wrap(d.pow, a.lo, n), self._wrap(u.pow, a.hi, n))
        if a.lo >= 0:
            return Interval(self._wrap(d.pow, a.lo, n), self._wrap(u.pow, a.hi, n))
        if a.hi <= 0:
            return Interval(self._wrap(d.pow, a.hi, n), self._wrap(u.pow, a.lo, n))
        m = max(neg(a.lo), a.hi)
        return Interval(mpfr(0), self._wrap(u.pow, m, n))

    def sqrt(self, a: "Interval") -> "Interval":
        a._check()
        if a.lo < 0:
            raise IntervalError("sqrt of an interval with negative part")
        return Interval(self.down.sqrt(a.lo), self.up.sqrt(a.hi))

    def abs(self, a: "Interval") -> "Interval":
        a._check()
        if a.lo >= 0:
            return a
        if a.hi <= 0:
            return Interval(neg(a.hi), neg(a.lo))
        return Interval(mpfr(0), max(neg(a.lo), a.hi))

    def scale2(self, a: "Interval", e: int) -> "Interval":
        """Exact multiplication by ``2**e`` (outward rounded only on under/overflow)."""
        a._check()
        return Interval(self.down.mul_2exp(a.lo, e), self.up.mul_2exp(a.hi, e))

    def pi(self) -> "Interval":
        return Interval(self.down.const_pi(), self.up.const_pi())

    def cos_sin(self, theta) -> tuple["Interval", "Interval"]:
        """Enclosures of cos and sin at an exactly representable angle."""
        t = _exact_mpfr(theta)
        d, u = self.down, self.up
        return Interval(d.cos(t), u.cos(t)), Interval(d.sin(t), u.sin(t))

    # -- rectangle arithmetic --------------------------------------------

    def radd(self, a: "Rectangle", b: "Rectangle") -> "Rectangle":
        return Rectangle(self.add(a.re, b.re), self.add(a.im, b.im))

    def rsub(self, a: "Rectangle", b: "Rectangle") -> "Rectangle":
        return Rectangle(self.sub(a.re, b.re), self.sub(a.im, b.im))

    def rmul(self, a: "Rectangle", b: "Rectangle") -> "Rectangle":
        re = self.sub(self.mul(a.re, b.re), self.mul(a.im, b.im))
        im = self.add(self.mul(a.re, b.im), self.mul(a.im, b.re))
        return Rectangle(re, im)

    def rdiv(self, a: "Rectangle", b: "Rectangle") -> "Rectangle":
        if b.contains(0):
            raise IntervalZeroDivisionError(f"divisor {b} contains the origin")
        den = self.add(self.pow(b.re, 2), self.pow(b.im, 2))
        num = self.rmul(a, Rectangle(b.re, self.neg(b.im)))
        return Rectangle(self.div(num.re, den), self.div(num.im, den))

    def rpow(self, a: "Rectangle", n: int) -> "Rectangle":
        """Integer power by repeated squaring in rectangle arithmetic."""
        result = Rectangle(Interval(1), Interval(0))
        base = a
        n = int(n)
        while n:
            if n & 1:
                result = self.rmul(result, base)
            n >>= 1
            if n:
                base = self.rsquare(base)
        return result

    def rsquare(self, a: "Rectangle") -> "Rectangle":
        re = self.sub(self.pow(a.re, 2), self.pow(a.im, 2))
        im = self.scale2(self.mul(a.re, a.im), 1)
        return Rectangle(re, im)

    def rscale(self, s: "Interval", a: "Rectangle") -> "Rectangle":
        return Rectangle(self.mul(s, a.re), self.mul(s, a.im))

    def rabs_upper(self, a: "Rectangle") -> mpfr:
        """Upper bound of ``|z|`` over the rectangle."""
        r2 = self.up.add(self.up.pow(a.re.mag(), 2), self.up.pow(a.im.mag(), 2))
        return self.up.sqrt(r2)

    # -- helpers ----------------------------------------------------------

    def _args(self, a, b):
        if not isinstance(a, Interval):
            a = self.convert(a)
        if not isinstance(b, Interval):
            b = self.convert(b)
        a._check()
        b._check()
        return a, b

    @staticmethod
    def _wrap(fn, x, n):
        return fn(x, n)


def mul_endpoints(down, up, alo, ahi, blo, bhi):
    """Outward endpoints of ``[alo, ahi] * [blo, bhi]`` by sign cases."""
    if alo >= 0:
        if blo >= 0:
            return down.mul(alo, blo), up.mul(ahi, bhi)
        if bhi <= 0:
            return down.mul(ahi, blo), up.mul(alo, bhi)
        return down.mul(ahi, blo), up.mul(ahi, bhi)
    if ahi <= 0:
        if blo >= 0:
            return down.mul(alo, bhi), up.mul(ahi, blo)
        if bhi <= 0:
            return down.mul(ahi, bhi), up.mul(alo, blo)
        return down.mul(alo, bhi), up.mul(alo, blo)
    if blo >= 0:
        return down.mul(alo, bhi), up.mul(ahi, bhi)
    if bhi <= 0:
        return down.mul(ahi, blo), up.mul(alo, blo)
    lo = min(down.mul(alo, bhi), down.mul(ahi, blo))
    hi = max(up.mul(alo, blo), up.mul(ahi, bhi))
    return lo, hi


_DEFAULT = ArithContext(132)
_current: contextvars.ContextVar[ArithContext] = contextvars.ContextVar(
    "renormproof_arith_context", default=_DEFAULT
)


def get_context() -> ArithContext:
    """The arithmetic context current in this thread/task."""
    return _current.get()


def set_context(ctx: ArithContext) -> contextvars.Token:
    return _current.set(ctx)


@contextmanager
def local_context(ctx: ArithContext):
    token = _current.set(ctx)
    try:
        yield ctx
    finally:
        _current.reset(token)


def exact_decimal(x: mpfr) -> str:
    """Exact decimal expansion of a finite binary number, in E-notation."""
    if not gmpy2.is_finite(x):
        raise IntervalOverflowError(f"non-finite value {x}")
    if x == 0:
        return "0"
    num, den = x.as_integer_ratio()
    num, den = int(num), int(den)
    k = den.bit_length() - 1  # den == 2**k
    digits = num * 5**k if k > 0 else num
    sign = "-" if digits < 0 else ""
    s = str(abs(digits))
    exp10 = len(s) - 1 - k
    s = s.rstrip("0") or "0"
    mant = s[0] + ("." + s[1:] if len(s) > 1 else "")
    return f"{sign}{mant}E{exp10:+d}"


class Interval:
    """Closed real interval ``[lo, hi]`` with finite MPFR endpoints.

    Construct from exactly representable endpoints (mpfr, int, float); use
    :meth:`ArithContext.convert` for decimal strings and rationals.  The
    empty interval is the distinct sentinel :data:`EMPTY`; arithmetic on it
    raises :class:`EmptyIntervalError`.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = _exact_mpfr(lo)
        hi = lo if hi is None else _exact_mpfr(hi)
        if not lo <= hi:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __setattr__(self, name, value):
        raise AttributeError("Interval is immutable")

    def __reduce__(self):
        if self.lo is None:
            return (_empty, ())
        return (Interval, (self.lo, self.hi))

    # -- predicates -------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return self.lo is None

    def _check(self):
        if self.lo is None:
            raise EmptyIntervalError("arithmetic on the empty interval")

    def contains(self, x) -> bool:
        """Membership of a real number (or subset test for an interval)."""
        if isinstance(x, Interval):
            return x.subset(self)
        if self.lo is None:
            return False
        if isinstance(x, Fraction):
            return Fraction(*self.lo.as_integer_ratio()) <= x <= Fraction(*self.hi.as_integer_ratio())
        if isinstance(x, str):
            x = Fraction(x)
            return self.contains(x)
        return self.lo <= x <= self.hi

    __contains__ = contains

    def subset(self, other: "Interval") -> bool:
        if self.lo is None:
            return True
        if other.lo is None:
            return False
        return other.lo <= self.lo and self.hi <= other.hi

    def hull(self, other: "Interval") -> "Interval":
        if self.lo is None:
            return other
        if other.lo is None:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: "Interval") -> "Interval":
        if self.lo is None or other.lo is None:
            return EMPTY
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return EMPTY
        return Interval(lo, hi)

    def overlaps(self, other: "Interval") -> bool:
        return not self.intersect(other).is_empty

    # -- measures ---------------------------------------------------------

    def mag(self) -> mpfr:
        """``max |x|`` over the interval (exact: no rounding involved)."""
        self._check()
        return max(fabs(self.lo), fabs(self.hi))

    def mig(self) -> mpfr:
        """``min |x|`` over the interval."""
        self._check()
        if self.lo <= 0 <= self.hi:
            return mpfr(0)
        return min(fabs(self.lo), fabs(self.hi))

    def mid(self, ctx: ArithContext | None = None) -> mpfr:
        ctx = ctx or get_context()
        self._check()
        return ctx.near.div_2exp(ctx.near.add(self.lo, self.hi), 1)

    def rad(self, ctx: ArithContext | None = None) -> mpfr:
        """Upper bound on the radius about :meth:`mid`."""
        ctx = ctx or get_context()
        m = self.mid(ctx)
        return max(ctx.up.sub(self.hi, m), ctx.up.sub(m, self.lo))

    def width(self, ctx: ArithContext | None = None) -> mpfr:
        ctx = ctx or get_context()
        self._check()
        return ctx.up.sub(self.hi, self.lo)

    @property
    def is_point(self) -> bool:
        return self.lo is not None and self.lo == self.hi

    # -- operators (current context) -------------------------------------

    def __add__(self, other):
        return get_context().add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return get_context().sub(self, other)

    def __rsub__(self, other):
        return get_context().sub(other, self)

    def __mul__(self, other):
        return get_context().mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return get_context().div(self, other)

    def __rtruediv__(self, other):
        return get_context().div(other, self)

    def __pow__(self, n):
        return get_context().pow(self, n)

    def __neg__(self):
        return get_context().neg(self)

    def __eq__(self, other):
        if not isinstance(other, Interval):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi and (self.lo is None) == (other.lo is None)

    def __hash__(self):
        return hash((self.lo, self.hi))

    def __repr__(self):
        if self.lo is None:
            return "Interval.EMPTY"
        return f"Interval({self.lo}, {self.hi})"

    def __format__(self, spec):
        if self.lo is None:
            return "[empty]"
        spec = spec or ".6g"
        return f"[{float(self.lo):{spec}}, {float(self.hi):{spec}}]"

    # -- serialization ----------------------------------------------------

    def to_strings(self) -> list[str]:
        """``[lo_string, hi_string]``; exact decimals, so parsing is lossless."""
        self._check()
        return [exact_decimal(self.lo), exact_decimal(self.hi)]

    @classmethod
    def from_strings(cls, pair, ctx: ArithContext | None = None) -> "Interval":
        ctx = ctx or get_context()
        lo_s, hi_s = pair
        return Interval(ctx.convert(lo_s).lo, ctx.convert(hi_s).hi)


def _empty():
    return EMPTY


EMPTY = object.__new__(Interval)
object.__setattr__(EMPTY, "lo", None)
object.__setattr__(EMPTY, "hi", None)
Interval.EMPTY = EMPTY


class Rectangle:
    """Complex enclosure ``re + i*im`` with interval components."""

    __slots__ = ("re", "im")

    def __init__(self, re: Interval, im: Interval | None = None):
        if not isinstance(re, Interval):
            re = Interval(re)
        if im is None:
            im = Interval(0)
        elif not isinstance(im, Interval):
            im = Interval(im)
        re._check()
        im._check()
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    def __setattr__(self, name, value):
        raise AttributeError("Rectangle is immutable")

    def __reduce__(self):
        return (Rectangle, (self.re, self.im))

    def contains(self, z) -> bool:
        if isinstance(z, Rectangle):
            return z.re.subset(self.re) and z.im.subset(self.im)
        z = complex(z) if not isinstance(z, (Interval,)) else z
        if isinstance(z, Interval):
            return z.subset(self.re) and self.im.contains(0)
        return self.re.contains(z.real) and self.im.contains(z.imag)

    __contains__ = contains

    def hull(self, other: "Rectangle") -> "Rectangle":
        return Rectangle(self.re.hull(other.re), self.im.hull(other.im))

    def __add__(self, other):
        return get_context().radd(self, _as_rect(other))

    __radd__ = __add__

    def __sub__(self, other):
        return get_context().rsub(self, _as_rect(other))

    def __rsub__(self, other):
        return get_context().rsub(_as_rect(other), self)

    def __mul__(self, other):
        return get_context().rmul(self, _as_rect(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return get_context().rdiv(self, _as_rect(other))

    def __eq__(self, other):
        if not isinstance(other, Rectangle):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __repr__(self):
        return f"Rectangle({self.re!r}, {self.im!r})"

    def to_strings(self) -> dict:
        return {"re": self.re.to_strings(), "im": self.im.to_strings()}

    @classmethod
    def from_strings(cls, data, ctx: ArithContext | None = None) -> "Rectangle":
        return cls(Interval.from_strings(data["re"], ctx), Interval.from_strings(data["im"], ctx))


def _as_rect(x) -> Rectangle:
    if isinstance(x, Rectangle):
        return x
    if isinstance(x, Interval):
        return Rectangle(x)
    if isinstance(x, complex):
        ctx = get_context()
        return Rectangle(ctx.convert(x.real), ctx.convert(x.imag))
    return Rectangle(get_context().convert(x))
