"""Function balls in the l1 disc algebra.

A :class:`FunctionBall` on a disc ``D(c, r)`` is the set of analytic functions

    f = f_P + f_H + f_E,   f(x) = F((x - c) / r),

where ``f_P`` is a polynomial of degree <= N whose chart coefficients lie in
the stored intervals, ``f_H`` is supported on powers > N with
``||f_H||_1 <= hi`` and ``f_E`` is arbitrary with ``||f_E||_1 <= err``.
Every operation below returns a ball containing the image of all members of
its operands.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import gmpy2
from gmpy2 import mpfr

from .interval import (
    fabs,
    neg,
    ArithContext,
    Interval,
    IntervalError,
    Rectangle,
    exact_decimal,
    get_context,
)

SERIAL_VERSION = 1

_ZERO = mpfr(0)
_ONE = mpfr(1)


class BallError(ValueError):
    """Incompatible operands (domain or truncation degree mismatch)."""


class CompositionDomainError(IntervalError):
    """The inner function is not mapped into the outer function's disc.

    ``theta`` is the offending upper bound on the l1 norm of the recharted
    inner function.
    """

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


def _fmt(x) -> str:
    return exact_decimal(x)


class Disc:
    """Open disc ``D(center, radius)`` with exactly representable parameters."""

    __slots__ = ("center", "radius")

    def __init__(self, center, radius):
        center = _to_binary(center)
        radius = _to_binary(radius)
        if not radius > 0:
            raise ValueError("disc radius must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)

    def __setattr__(self, name, value):
        raise AttributeError("Disc is immutable")

    def __reduce__(self):
        return (Disc, (self.center, self.radius))

    def __eq__(self, other):
        return isinstance(other, Disc) and self.center == other.center and self.radius == other.radius

    def __hash__(self):
        return hash((self.center, self.radius))

    def __repr__(self):
        return f"Disc({float(self.center)!r}, {float(self.radius)!r})"

    def chart(self, x, ctx: ArithContext | None = None):
        """``psi(x) = (x - c) / r`` for an Interval or Rectangle."""
        ctx = ctx or get_context()
        if isinstance(x, Rectangle):
            re = ctx.div(ctx.sub(x.re, Interval(self.center)), Interval(self.radius))
            im = ctx.div(x.im, Interval(self.radius))
            return Rectangle(re, im)
        x = ctx.convert(x)
        return ctx.div(ctx.sub(x, Interval(self.center)), Interval(self.radius))

    def overlaps(self, other: "Disc") -> bool:
        d = abs(Fraction(*self.center.as_integer_ratio()) - Fraction(*other.center.as_integer_ratio()))
        return d < Fraction(*self.radius.as_integer_ratio()) + Fraction(*other.radius.as_integer_ratio())

    def contains_point(self, x) -> bool:
        return abs(complex(x) - float(self.center)) < float(self.radius)

    def to_dict(self) -> dict:
        return {"c": _fmt(self.center), "r": _fmt(self.radius)}

    @classmethod
    def from_dict(cls, data) -> "Disc":
        return cls(mpfr(data["c"], 256), mpfr(data["r"], 256))


def _to_binary(x) -> mpfr:
    """Disc parameters: decimal strings round to the nearest double."""
    if isinstance(x, str):
        return mpfr(float(x), 53)
    if isinstance(x, type(_ZERO)):
        return x
    if isinstance(x, int):
        return mpfr(x, max(53, x.bit_length() + 1))
    return mpfr(float(x), 53)


class FunctionBall:
    """Ball ``B(v_P; hi, err)`` of analytic functions on ``domain``.

    Stored as parallel tuples of lower/upper coefficient endpoints (chart
    coefficients ``a_0 .. a_N``) plus the two norm budgets.  Use
    :attr:`coeffs` for the coefficients as :class:`Interval` objects.
    """

    __slots__ = ("domain", "lo", "up", "hi", "err")

    def __init__(self, domain: Disc, lo: Sequence, up: Sequence, hi=_ZERO, err=_ZERO):
        if len(lo) != len(up) or not lo:
            raise BallError("coefficient endpoint lists must be non-empty and equal length")
        hi = mpfr(hi) if not isinstance(hi, type(_ZERO)) else hi
        err = mpfr(err) if not isinstance(err, type(_ZERO)) else err
        if hi < 0 or err < 0 or not (gmpy2.is_finite(hi) and gmpy2.is_finite(err)):
            raise BallError("norm budgets must be finite and non-negative")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "lo", tuple(lo))
        object.__setattr__(self, "up", tuple(up))
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "err", err)

    def __setattr__(self, name, value):
        raise AttributeError("FunctionBall is immutable")

    def __reduce__(self):
        return (FunctionBall, (self.domain, self.lo, self.up, self.hi, self.err))

    @property
    def degree(self) -> int:
        return len(self.lo) - 1

    @property
    def coeffs(self) -> tuple[Interval, ...]:
        return tuple(Interval(a, b) for a, b in zip(self.lo, self.up))

    @classmethod
    def from_intervals(cls, domain: Disc, coeffs: Sequence[Interval], hi=_ZERO, err=_ZERO):
        return cls(domain, [c.lo for c in coeffs], [c.hi for c in coeffs], hi, err)

    def is_singleton(self) -> bool:
        return self.hi == 0 and self.err == 0 and all(a == b for a, b in zip(self.lo, self.up))

    def midpoint_coeffs(self, ctx: ArithContext | None = None) -> list:
        ctx = ctx or get_context()
        return [ctx.near.div_2exp(ctx.near.add(a, b), 1) for a, b in zip(self.lo, self.up)]

    def phi(self, ctx: ArithContext | None = None) -> Interval:
        """Enclosure of the constant chart coefficient over all members."""
        ctx = ctx or get_context()
        return Interval(ctx.down.sub(self.lo[0], self.err), ctx.up.add(self.up[0], self.err))

    def __repr__(self):
        return (
            f"FunctionBall({self.domain!r}, N={self.degree}, "
            f"a0={Interval(self.lo[0], self.up[0]):.6g}, hi={float(self.hi):.3g}, err={float(self.err):.3g})"
        )

    # operator sugar (current context)
    def __add__(self, other):
        if isinstance(other, FunctionBall):
            return ball_add(self, other)
        return ball_add_constant(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, FunctionBall):
            return ball_sub(self, other)
        return ball_add_constant(self, ball_neg_scalar(other))

    def __mul__(self, other):
        if isinstance(other, FunctionBall):
            return ball_mul(self, other)
        return ball_scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return FunctionBall(self.domain, [neg(b) for b in self.up], [neg(a) for a in self.lo], self.hi, self.err)

    # serialization
    def to_dict(self) -> dict:
        return {
            "version": SERIAL_VERSION,
            "domain": self.domain.to_dict(),
            "N": self.degree,
            "coeffs": [[_fmt(a), _fmt(b)] for a, b in zip(self.lo, self.up)],
            "hi": _fmt(self.hi),
            "err": _fmt(self.err),
        }

    @classmethod
    def from_dict(cls, data, ctx: ArithContext | None = None) -> "FunctionBall":
        ctx = ctx or get_context()
        if data.get("version") != SERIAL_VERSION:
            raise BallError(f"unsupported ball format version {data.get('version')}")
        coeffs = [Interval.from_strings(p, ctx) for p in data["coeffs"]]
        if len(coeffs) != data["N"] + 1:
            raise BallError("coefficient count does not match N")
        return cls.from_intervals(
            Disc.from_dict(data["domain"]),
            coeffs,
            ctx.convert(data["hi"]).hi,
            ctx.convert(data["err"]).hi,
        )


def ball_neg_scalar(s):
    ctx = get_context()
    return ctx.neg(ctx.convert(s))


class PairBall:
    """A function on ``Omega_0 u Omega_1`` held as one ball per disc."""

    __slots__ = ("part0", "part1")

    def __init__(self, part0: FunctionBall, part1: FunctionBall):
        if part0.degree != part1.degree:
            raise BallError("pair parts must share the truncation degree")
        if not part0.domain.overlaps(part1.domain):
            raise BallError("pair domains must overlap")
        object.__setattr__(self, "part0", part0)
        object.__setattr__(self, "part1", part1)

    def __setattr__(self, name, value):
        raise AttributeError("PairBall is immutable")

    def __reduce__(self):
        return (PairBall, (self.part0, self.part1))

    @property
    def degree(self) -> int:
        return self.part0.degree

    def norm_upper(self, ctx: ArithContext | None = None):
        ctx = ctx or get_context()
        return ctx.up.add(ball_norm_upper(self.part0, ctx), ball_norm_upper(self.part1, ctx))

    def to_dict(self) -> dict:
        return {"version": SERIAL_VERSION, "part0": self.part0.to_dict(), "part1": self.part1.to_dict()}

    @classmethod
    def from_dict(cls, data, ctx=None) -> "PairBall":
        return cls(FunctionBall.from_dict(data["part0"], ctx), FunctionBall.from_dict(data["part1"], ctx))


# ---------------------------------------------------------------------------
# constructors


def ball_singleton(coeffs: Sequence, domain: Disc, ctx: ArithContext | None = None) -> FunctionBall:
    """Radius-zero ball at a polynomial with exactly representable coefficients."""
    ctx = ctx or get_context()
    vals = []
    for c in coeffs:
        iv = ctx.convert(c)
        if not iv.is_point:
            raise BallError(f"coefficient {c!r} is not representable at {ctx.precision} bits")
        vals.append(iv.lo)
    return FunctionBall(domain, vals, vals)


def ball_zero(domain: Disc, N: int) -> FunctionBall:
    z = [_ZERO] * (N + 1)
    return FunctionBall(domain, z, z)


def ball_constant(value, domain: Disc, N: int, ctx: ArithContext | None = None) -> FunctionBall:
    ctx = ctx or get_context()
    v = ctx.convert(value)
    lo = [v.lo] + [_ZERO] * N
    up = [v.hi] + [_ZERO] * N
    return FunctionBall(domain, lo, up)


def ball_monomial(k: int, domain: Disc, N: int) -> FunctionBall:
    """The singleton ``E_k`` at the chart basis element ``e_k``."""
    if not 0 <= k <= N:
        raise BallError("basis index out of range")
    c = [_ZERO] * (N + 1)
    c[k] = _ONE
    return FunctionBall(domain, c, c)


def ball_high_order_unit(domain: Disc, N: int) -> FunctionBall:
    """``E_H``: the convex hull of all high-order basis elements (hi = 1)."""
    z = [_ZERO] * (N + 1)
    return FunctionBall(domain, z, z, hi=_ONE)


def ball_identity(domain: Disc, N: int) -> FunctionBall:
    """The function ``x -> x`` on ``domain``: chart coefficients ``(c, r)``."""
    if N < 1:
        raise BallError("identity needs N >= 1")
    c = [domain.center, domain.radius] + [_ZERO] * (N - 1)
    return FunctionBall(domain, c, c)


def ball_affine(scale: Interval, domain: Disc, N: int, ctx: ArithContext | None = None) -> FunctionBall:
    """The function ``x -> s*x`` on ``domain`` for an interval ``s``."""
    ctx = ctx or get_context()
    c0 = ctx.mul(scale, Interval(domain.center))
    c1 = ctx.mul(scale, Interval(domain.radius))
    lo = [c0.lo, c1.lo] + [_ZERO] * (N - 1)
    up = [c0.hi, c1.hi] + [_ZERO] * (N - 1)
    return FunctionBall(domain, lo, up)


def ball_inflate(f: FunctionBall, rho, ctx: ArithContext | None = None) -> FunctionBall:
    """Add ``rho`` to the general error budget."""
    ctx = ctx or get_context()
    rho = ctx.convert(rho).hi
    if rho < 0:
        raise BallError("inflation radius must be non-negative")
    return FunctionBall(f.domain, f.lo, f.up, f.hi, ctx.up.add(f.err, rho))


# ---------------------------------------------------------------------------
# norms


def _coeff_mags(f: FunctionBall):
    return [max(fabs(a), fabs(b)) for a, b in zip(f.lo, f.up)]


def poly_norm_upper(f: FunctionBall, ctx: ArithContext | None = None) -> mpfr:
    """Upper bound on the l1 norm of every admissible polynomial part."""
    ctx = ctx or get_context()
    return ctx.up.fsum(_coeff_mags(f))


def ball_norm_upper(f: FunctionBall, ctx: ArithContext | None = None) -> mpfr:
    """Upper bound of ``||f'||_1`` over all members ``f'`` of the ball."""
    ctx = ctx or get_context()
    return ctx.up.fsum(_coeff_mags(f) + [f.hi, f.err])


# ---------------------------------------------------------------------------
# linear operations


def _same(f: FunctionBall, g: FunctionBall):
    if f.domain != g.domain:
        raise BallError(f"domain mismatch: {f.domain} vs {g.domain}")
    if f.degree != g.degree:
        raise BallError(f"truncation degree mismatch: {f.degree} vs {g.degree}")


def ball_add(f: FunctionBall, g: FunctionBall, ctx: ArithContext | None = None) -> FunctionBall:
    ctx = ctx or get_context()
    _same(f, g)
    d, u = ctx.down, ctx.up
    lo = [d.add(a, b) for a, b in zip(f.lo, g.lo)]
    up = [u.add(a, b) for a, b in zip(f.up, g.up)]
    return FunctionBall(f.domain, lo, up, u.add(f.hi, g.hi), u.add(f.err, g.err))


def ball_sub(f: FunctionBall, g: FunctionBall, ctx: ArithContext | None = None) -> FunctionBall:
    """Difference with operands treated as independent members."""
    ctx = ctx or get_context()
    _same(f, g)
    d, u = ctx.down, ctx.up
    lo = [d.sub(a, b) for a, b in zip(f.lo, g.up)]
    up = [u.sub(a, b) for a, b in zip(f.up, g.lo)]
    return FunctionBall(f.domain, lo, up, u.add(f.hi, g.hi), u.add(f.err, g.err))


def ball_scale(f: FunctionBall, s, ctx: ArithContext | None = None) -> FunctionBall:
    """Multiply every member by every scalar in the interval ``s``."""
    ctx = ctx or get_context()
    s = ctx.convert(s)
    d, u = ctx.down, ctx.up
    lo, up = [], []
    from .interval import mul_endpoints

    for a, b in zip(f.lo, f.up):
        x, y = mul_endpoints(d, u, a, b, s.lo, s.hi)
        lo.append(x)
        up.append(y)
    m = s.mag()
    return FunctionBall(f.domain, lo, up, u.mul(f.hi, m), u.mul(f.err, m))


def ball_add_constant(f: FunctionBall, s, ctx: ArithContext | None = None) -> FunctionBall:
    ctx = ctx or get_context()
    s = ctx.convert(s)
    lo = list(f.lo)
    up = list(f.up)
    lo[0] = ctx.down.add(lo[0], s.lo)
    up[0] = ctx.up.add(up[0], s.hi)
    return FunctionBall(f.domain, lo, up, f.hi, f.err)


def ball_div_point(f: FunctionBall, r: mpfr, ctx: ArithContext | None = None) -> FunctionBall:
    """Divide by an exactly representable positive number."""
    ctx = ctx or get_context()
    d, u = ctx.down, ctx.up
    return FunctionBall(
        f.domain,
        [d.div(a, r) for a in f.lo],
        [u.div(b, r) for b in f.up],
        u.div(f.hi, r),
        u.div(f.err, r),
    )


def ball_with_domain(f: FunctionBall, domain: Disc) -> FunctionBall:
    return FunctionBall(domain, f.lo, f.up, f.hi, f.err)


# ---------------------------------------------------------------------------
# products


def _effective_length(lo, up) -> int:
    n = len(lo)
    while n > 1 and lo[n - 1] == 0 and up[n - 1] == 0:
        n -= 1
    return n


def poly_product(ctx: ArithContext, alo, aup, blo, bup, N: int):
    """Interval Cauchy product truncated at degree N.

    Returns ``(lo, up, overflow)``, where ``overflow`` bounds the l1 norm of
    every admissible product coefficient of degree > N.  Each output
    coefficient is a correctly rounded sum of exact endpoint products.
    """
    na = _effective_length(alo, aup)
    nb = _effective_length(blo, bup)
    ex = ctx.exact.mul
    top = na + nb - 1
    lows = [[] for _ in range(top)]
    highs = [[] for _ in range(top)]
    bs = []
    for j in range(nb):
        x, y = blo[j], bup[j]
        bs.append((x, y, 0 if x >= 0 else (1 if y <= 0 else 2), x == y))
    for i in range(na):
        p, q = alo[i], aup[i]
        if p == 0 and q == 0:
            continue
        sa = 0 if p >= 0 else (1 if q <= 0 else 2)
        pa = p == q
        for j in range(nb):
            x, y, sb, pb = bs[j]
            k = i + j
            if pa:
                if pb:
                    v = ex(p, x)
                    lows[k].append(v)
                    highs[k].append(v)
                elif p >= 0:
                    lows[k].append(ex(p, x))
                    highs[k].append(ex(p, y))
                else:
                    lows[k].append(ex(p, y))
                    highs[k].append(ex(p, x))
                continue
            if pb:
                if x >= 0:
                    lows[k].append(ex(p, x))
                    highs[k].append(ex(q, x))
                else:
                    lows[k].append(ex(q, x))
                    highs[k].append(ex(p, x))
                continue
            if sa == 0:
                if sb == 0:
                    lows[k].append(ex(p, x)); highs[k].append(ex(q, y))
                elif sb == 1:
                    lows[k].append(ex(q, x)); highs[k].append(ex(p, y))
                else:
                    lows[k].append(ex(q, x)); highs[k].append(ex(q, y))
            elif sa == 1:
                if sb == 0:
                    lows[k].append(ex(p, y)); highs[k].append(ex(q, x))
                elif sb == 1:
                    lows[k].append(ex(q, y)); highs[k].append(ex(p, x))
                else:
                    lows[k].append(ex(p, y)); highs[k].append(ex(p, x))
            else:
                if sb == 0:
                    lows[k].append(ex(p, y)); highs[k].append(ex(q, y))
                elif sb == 1:
                    lows[k].append(ex(q, x)); highs[k].append(ex(p, x))
                else:
                    lows[k].append(min(ex(p, y), ex(q, x)))
                    highs[k].append(max(ex(p, x), ex(q, y)))
    dsum, usum = ctx.down.fsum, ctx.up.fsum
    lo = [_ZERO] * (N + 1)
    up = [_ZERO] * (N + 1)
    over = []
    for k in range(top):
        if not lows[k]:
            continue
        l_k = dsum(lows[k])
        u_k = usum(highs[k])
        if k <= N:
            lo[k] = l_k
            up[k] = u_k
        else:
            over.append(max(fabs(l_k), fabs(u_k)))
    overflow = usum(over) if over else _ZERO
    return lo, up, overflow


def ball_mul(f: FunctionBall, g: FunctionBall, ctx: ArithContext | None = None) -> FunctionBall:
    """Product ball.

    Polynomial-times-polynomial overflow above degree N and every product
    involving a high-order part keeps valuation > N, so it is charged to
    ``hi``; every term with an ``err`` factor is charged to ``err``.
    """
    ctx = ctx or get_context()
    _same(f, g)
    N = f.degree
    lo, up, overflow = poly_product(ctx, f.lo, f.up, g.lo, g.up, N)
    u = ctx.up
    nf = poly_norm_upper(f, ctx)
    ng = poly_norm_upper(g, ctx)
    hi = u.fsum([overflow, u.mul(nf, g.hi), u.mul(f.hi, ng), u.mul(f.hi, g.hi)])
    g_all = u.fsum([ng, g.hi, g.err])
    err = u.add(u.mul(f.err, g_all), u.mul(u.add(nf, f.hi), g.err))
    return FunctionBall(f.domain, lo, up, hi, err)


def ball_square(f: FunctionBall, ctx: ArithContext | None = None) -> FunctionBall:
    return ball_mul(f, f, ctx)


def ball_pow(f: FunctionBall, n: int, ctx: ArithContext | None = None) -> FunctionBall:
    """Integer power by repeated squaring (``x**4`` is two squarings)."""
    ctx = ctx or get_context()
    if n < 0:
        raise ValueError("negative power")
    result = None
    base = f
    while n:
        if n & 1:
            result = base if result is None else ball_mul(result, base, ctx)
        n >>= 1
        if n:
            base = ball_mul(base, base, ctx)
    if result is None:
        return ball_constant(1, f.domain, f.degree, ctx)
    return result


def ball_powers(w: FunctionBall, n: int, ctx: ArithContext | None = None) -> list[FunctionBall]:
    """``[w**0, w**1, ..., w**n]`` by successive multiplication."""
    ctx = ctx or get_context()
    out = [ball_constant(1, w.domain, w.degree, ctx)]
    if n >= 1:
        out.append(w)
    for _ in range(2, n + 1):
        out.append(ball_mul(out[-1], w, ctx))
    return out


# ---------------------------------------------------------------------------
# composition


def rechart(g: FunctionBall, disc: Disc, ctx: ArithContext | None = None) -> FunctionBall:
    """``psi_disc o g`` on g's own domain."""
    ctx = ctx or get_context()
    shifted = ball_add_constant(g, Interval(neg(disc.center)), ctx)
    return ball_div_point(shifted, disc.radius, ctx)


def compose_margin(f_domain: Disc, g: FunctionBall, ctx: ArithContext | None = None):
    """Recharted inner function and its l1 bound ``theta``."""
    ctx = ctx or get_context()
    w = rechart(g, f_domain, ctx)
    return w, ball_norm_upper(w, ctx)


def _horner(ctx, lo, up, w: FunctionBall) -> FunctionBall:
    """Evaluate the interval polynomial ``sum [lo_k, up_k] t^k`` at ``t = w``."""
    n = _effective_length(lo, up)
    N = w.degree
    acc = ball_constant(Interval(lo[n - 1], up[n - 1]), w.domain, N, ctx)
    for k in range(n - 2, -1, -1):
        acc = ball_mul(acc, w, ctx)
        acc = ball_add_constant(acc, Interval(lo[k], up[k]), ctx)
    return acc


def _pow_upper(ctx, theta, n):
    return ctx.up.pow(theta, n)


def ball_compose(f: FunctionBall, g: FunctionBall, ctx: ArithContext | None = None, *, recharted=None) -> FunctionBall:
    """Enclose ``f' o g'`` for all members, as a ball on g's domain.

    ``recharted`` optionally supplies a precomputed ``(w, theta)`` from
    :func:`compose_margin`.
    """
    ctx = ctx or get_context()
    if f.degree != g.degree:
        raise BallError("truncation degree mismatch")
    w, theta = recharted if recharted is not None else compose_margin(f.domain, g, ctx)
    tails = f.hi > 0 or f.err > 0
    if theta > 1 or (tails and theta >= 1):
        raise CompositionDomainError(f"inner function leaves the disc: l1 bound {float(theta):.6g}", theta)
    out = _horner(ctx, f.lo, f.up, w)
    u = ctx.up
    extra = u.add(u.mul(f.hi, _pow_upper(ctx, theta, f.degree + 1)), f.err)
    return FunctionBall(out.domain, out.lo, out.up, out.hi, u.add(out.err, extra))


def sup_k_theta(theta, k0: int, ctx: ArithContext | None = None) -> mpfr:
    """Upper bound of ``sup_{k >= k0} k * theta**(k-1)`` for ``0 <= theta < 1``.

    ``k theta^(k-1)`` increases in k while ``k < theta/(1-theta)``, so the
    supremum over ``k >= k0`` sits at ``max(k0, ceil(theta/(1-theta)))``.
    """
    ctx = ctx or get_context()
    if theta >= 1:
        raise CompositionDomainError("derivative tail needs theta < 1", theta)
    if theta <= 0:
        return _ONE if k0 <= 1 else _ZERO
    t = Fraction(*theta.as_integer_ratio())
    peak = -((-t) // (1 - t))  # ceil(t / (1 - t))
    k = max(k0, int(peak), 1)
    return ctx.up.mul(mpfr(k), ctx.up.pow(theta, k - 1))


def derivative_coeffs(f: FunctionBall, ctx: ArithContext | None = None):
    """Chart-derivative coefficients ``k a_k`` (degree N-1, padded to N)."""
    ctx = ctx or get_context()
    d, u = ctx.down, ctx.up
    lo = [d.mul(a, k) for k, a in enumerate(f.lo)][1:] + [_ZERO]
    up = [u.mul(b, k) for k, b in enumerate(f.up)][1:] + [_ZERO]
    return lo, up


def ball_derivative_compose(f: FunctionBall, g: FunctionBall, ctx: ArithContext | None = None, *, recharted=None) -> FunctionBall:
    """Enclose ``f'' o g'`` (derivative in x, i.e. chart derivative over r_f)."""
    ctx = ctx or get_context()
    if f.degree != g.degree:
        raise BallError("truncation degree mismatch")
    w, theta = recharted if recharted is not None else compose_margin(f.domain, g, ctx)
    if theta >= 1:
        raise CompositionDomainError(f"derivative composition needs theta < 1, got {float(theta):.6g}", theta)
    lo, up = derivative_coeffs(f, ctx)
    out = _horner(ctx, lo, up, w)
    u = ctx.up
    extra = u.add(
        u.mul(f.hi, sup_k_theta(theta, f.degree + 1, ctx)),
        u.mul(f.err, sup_k_theta(theta, 1, ctx)),
    )
    out = FunctionBall(out.domain, out.lo, out.up, out.hi, u.add(out.err, extra))
    return ball_div_point(out, f.domain.radius, ctx)


# ---------------------------------------------------------------------------
# pointwise evaluation


def ball_eval(f: FunctionBall, x, ctx: ArithContext | None = None):
    """Enclosure of ``f(x)`` over all members, for an Interval or Rectangle x."""
    ctx = ctx or get_context()
    t = f.domain.chart(x, ctx)
    N = f.degree
    u = ctx.up
    if isinstance(t, Rectangle):
        tm = ctx.rabs_upper(t)
        if tm > 1:
            raise CompositionDomainError(f"argument outside the closed disc (|psi| <= {float(tm):.6g})", tm)
        acc = Rectangle(Interval(f.lo[N], f.up[N]))
        for k in range(N - 1, -1, -1):
            acc = ctx.radd(ctx.rmul(acc, t), Rectangle(Interval(f.lo[k], f.up[k])))
        tail = u.add(u.mul(f.hi, u.pow(tm, N + 1)), f.err)
        pad = Interval(neg(tail), tail)
        return Rectangle(ctx.add(acc.re, pad), ctx.add(acc.im, pad))
    tm = t.mag()
    if tm > 1:
        raise CompositionDomainError(f"argument outside the closed disc (|psi| <= {float(tm):.6g})", tm)
    acc = Interval(f.lo[N], f.up[N])
    for k in range(N - 1, -1, -1):
        acc = ctx.add(ctx.mul(acc, t), Interval(f.lo[k], f.up[k]))
    tail = u.add(u.mul(f.hi, u.pow(tm, N + 1)), f.err)
    return ctx.add(acc, Interval(neg(tail), tail))


def ball_eval_derivative(f: FunctionBall, x, ctx: ArithContext | None = None) -> Interval:
    """Enclosure of ``f'(x)`` for real ``x`` strictly inside the disc."""
    ctx = ctx or get_context()
    t = f.domain.chart(x, ctx)
    tm = t.mag()
    if tm >= 1:
        raise CompositionDomainError("derivative evaluation needs |psi(x)| < 1", tm)
    lo, up = derivative_coeffs(f, ctx)
    N = f.degree
    acc = Interval(lo[N - 1], up[N - 1]) if N >= 1 else Interval(0)
    for k in range(N - 2, -1, -1):
        acc = ctx.add(ctx.mul(acc, t), Interval(lo[k], up[k]))
    u = ctx.up
    tail = u.add(u.mul(f.hi, sup_k_theta(tm, N + 1, ctx)), u.mul(f.err, sup_k_theta(tm, 1, ctx)))
    acc = ctx.add(acc, Interval(neg(tail), tail))
    return ctx.div(acc, Interval(f.domain.radius))


def ball_midpoint(f: FunctionBall, ctx: ArithContext | None = None) -> FunctionBall:
    """Singleton at the coefficient midpoints (budgets dropped)."""
    m = f.midpoint_coeffs(ctx)
    return FunctionBall(f.domain, m, m)
