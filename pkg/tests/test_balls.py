"""Function-ball operations contain every sampled member of the result.

A member of ``B(c; hi, err)`` is drawn as coefficients inside the intervals
plus a high-order monomial of norm <= hi plus an error monomial of norm
<= err.  Members are evaluated exactly in rationals.
"""

import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from renormproof import balls as B
from renormproof.balls import CompositionDomainError, Disc, FunctionBall
from renormproof.interval import ArithContext, Interval, Rectangle

CTX = ArithContext(80)
N = 6
POINTS = 100
SCALE = 2**-20


class CF:
    """Exact complex rational."""

    __slots__ = ("re", "im")

    def __init__(self, re, im=0):
        self.re, self.im = Fraction(re), Fraction(im)

    def __add__(self, o):
        o = o if isinstance(o, CF) else CF(o)
        return CF(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = o if isinstance(o, CF) else CF(o)
        return CF(self.re - o.re, self.im - o.im)

    def __mul__(self, o):
        o = o if isinstance(o, CF) else CF(o)
        return CF(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return CF(self.re / s, self.im / s)

    def __pow__(self, n):
        out = CF(1)
        for _ in range(n):
            out = out * self
        return out


def frac(x):
    return Fraction(*x.as_integer_ratio())


class Member:
    def __init__(self, domain, coeffs):
        self.domain = domain
        self.coeffs = coeffs  # power -> Fraction

    def chart(self, x):
        return (x - frac(self.domain.center)) / frac(self.domain.radius)

    def __call__(self, x):
        t = self.chart(x)
        return sum((c * t**k for k, c in self.coeffs.items()), CF(0))

    def deriv(self, x):
        t = self.chart(x)
        r = frac(self.domain.radius)
        return sum((c * k * t ** (k - 1) for k, c in self.coeffs.items() if k), CF(0)) / r


def sample(rng, iv_lo, iv_hi):
    return iv_lo + (iv_hi - iv_lo) * Fraction(rng.randint(0, 64), 64)


def member_of(ball: FunctionBall, rng) -> Member:
    c = {k: sample(rng, frac(a), frac(b)) for k, (a, b) in enumerate(zip(ball.lo, ball.up))}
    if ball.hi > 0:
        k = N + 1 + rng.randint(0, 3)
        c[k] = c.get(k, 0) + sample(rng, -frac(ball.hi), frac(ball.hi))
    if ball.err > 0:
        k = rng.randint(0, N + 3)
        c[k] = c.get(k, 0) + sample(rng, -frac(ball.err), frac(ball.err))
    return Member(ball.domain, c)


@st.composite
def balls(draw, domain, size=0.3, tails=True):
    def dy(bound):
        return Fraction(draw(st.integers(-int(bound / SCALE), int(bound / SCALE)))) * SCALE

    lo, up = [], []
    for _ in range(N + 1):
        a = dy(size)
        w = abs(dy(size / 100))
        lo.append(CTX.convert(a).lo)
        up.append(CTX.convert(a + w).lo)
    hi = abs(dy(size / 20)) if tails and draw(st.booleans()) else 0
    err = abs(dy(size / 20)) if tails and draw(st.booleans()) else 0
    return FunctionBall(domain, lo, up, CTX.convert(hi).hi, CTX.convert(err).hi)


def disc_points(domain, rng, inner=0.97):
    """Dyadic points of the closed disc (every 4th one real)."""
    c, r = frac(domain.center), frac(domain.radius)
    pts = []
    while len(pts) < POINTS:
        tr, ti = (Fraction(rng.randint(-1024, 1024), 1024) for _ in range(2))
        if len(pts) % 4 == 0:
            ti = Fraction(0)
        if tr * tr + ti * ti <= inner * inner:
            pts.append(CF(c + r * tr, r * ti))
    return pts


def enclosure_at(ball, x: CF):
    if x.im == 0:
        return B.ball_eval(ball, CTX.convert(x.re), CTX)
    return B.ball_eval(ball, Rectangle(CTX.convert(x.re), CTX.convert(x.im)), CTX)


def contains(enc, v: CF) -> bool:
    if isinstance(enc, Interval):
        return v.im == 0 and enc.contains(v.re)
    return enc.re.contains(v.re) and enc.im.contains(v.im)


def assert_contains(result, exact, pts):
    for x in pts:
        enc = enclosure_at(result, x)
        assert contains(enc, exact(x)), (x.re, x.im, enc)


OMEGA = Disc(0.5, 0.5)
UNIT = Disc(0.0, 1.0)
CASES = dict(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@settings(**CASES)
@given(f=balls(OMEGA), seed=st.integers(0, 2**32))
def test_eval(f, seed):
    rng = random.Random(seed)
    fm = member_of(f, rng)
    assert_contains(f, fm, disc_points(OMEGA, rng, inner=1))


@pytest.mark.parametrize("op", ["add", "sub"])
@settings(**CASES)
@given(f=balls(OMEGA), g=balls(OMEGA), seed=st.integers(0, 2**32))
def test_add_sub(op, f, g, seed):
    rng = random.Random(seed)
    fm, gm = member_of(f, rng), member_of(g, rng)
    if op == "add":
        res, exact = B.ball_add(f, g, CTX), lambda x: fm(x) + gm(x)
    else:
        res, exact = B.ball_sub(f, g, CTX), lambda x: fm(x) - gm(x)
    assert_contains(res, exact, disc_points(OMEGA, rng))


@settings(**CASES)
@given(f=balls(OMEGA), a=st.fractions(-3, 3, max_denominator=64), seed=st.integers(0, 2**32))
def test_scale(f, a, seed):
    rng = random.Random(seed)
    fm = member_of(f, rng)
    s = CTX.convert(a)
    sv = sample(rng, frac(s.lo), frac(s.hi))
    assert_contains(B.ball_scale(f, s, CTX), lambda x: fm(x) * sv, disc_points(OMEGA, rng))


@settings(**CASES)
@given(f=balls(OMEGA), g=balls(OMEGA), seed=st.integers(0, 2**32))
def test_mul(f, g, seed):
    rng = random.Random(seed)
    fm, gm = member_of(f, rng), member_of(g, rng)
    assert_contains(B.ball_mul(f, g, CTX), lambda x: fm(x) * gm(x), disc_points(OMEGA, rng))


@settings(**CASES)
@given(f=balls(UNIT), g=balls(OMEGA, size=0.1), seed=st.integers(0, 2**32))
def test_compose(f, g, seed):
    rng = random.Random(seed)
    fm, gm = member_of(f, rng), member_of(g, rng)
    # l1 norm of g is below 0.8, so the composition is always defined
    res = B.ball_compose(f, g, CTX)
    assert_contains(res, lambda x: fm(gm(x)), disc_points(OMEGA, rng))


@settings(**CASES)
@given(f=balls(UNIT), g=balls(OMEGA, size=0.1), seed=st.integers(0, 2**32))
def test_derivative_compose(f, g, seed):
    rng = random.Random(seed)
    fm, gm = member_of(f, rng), member_of(g, rng)
    # l1 norm of g is below 0.8, so the composition is always defined
    res = B.ball_derivative_compose(f, g, CTX)
    assert_contains(res, lambda x: fm.deriv(gm(x)), disc_points(OMEGA, rng))


def test_compose_rejects_inner_function_leaving_disc():
    f = B.ball_identity(UNIT, N)
    g = B.ball_constant(2, OMEGA, N, CTX)
    with pytest.raises(CompositionDomainError):
        B.ball_compose(f, g, CTX)


def test_budgets_must_be_nonnegative():
    with pytest.raises(B.BallError):
        FunctionBall(UNIT, [0], [0], -1, 0)


def test_serialization_round_trip():
    f = B.ball_inflate(B.ball_identity(OMEGA, N), "1e-10", CTX)
    g = FunctionBall.from_dict(f.to_dict(), CTX)
    assert (g.lo, g.up, g.hi, g.err, g.domain) == (f.lo, f.up, f.hi, f.err, f.domain)
