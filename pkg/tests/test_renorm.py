import math
from fractions import Fraction

import mpmath
import pytest

from renormproof import approx as A
from renormproof import balls as B
from renormproof.balls import Disc
from renormproof.interval import Interval, local_context
from renormproof.renorm import (
    RenormConfig,
    apply_DT,
    apply_T,
    arc_rectangle,
    boundary_cover,
    check_domain_extension,
    check_domain_extension_pair,
    circle_angles,
    SymmetricPairSource,
)


@pytest.fixture(scope="module")
def rc(run):
    return run.cfg.renorm()


@pytest.fixture(scope="module")
def G0(run, rc):
    return A.ApproxSeries(tuple(rc.ctx.point(s) for s in run.payload("bootstrap")["G0"]), rc.domain)


def within(iv: Interval, x, slack) -> bool:
    return Fraction(*iv.lo.as_integer_ratio()) - slack <= x <= Fraction(*iv.hi.as_integer_ratio()) + slack


def test_singleton_image_matches_truncated_series(G0, rc):
    with local_context(rc.ctx):
        ball = apply_T(G0.to_ball(rc.ctx), rc)
        approx = A.apply_T_approx(G0, rc.ctx)
    slack = Fraction(*ball.err.as_integer_ratio()) + Fraction(1, 10**35)
    for k, (iv, x) in enumerate(zip(ball.coeffs, approx.coeffs)):
        assert within(iv, Fraction(*x.as_integer_ratio()), slack), k
    # the high-order image of a polynomial is tiny but not zero
    assert 0 < float(ball.hi) < 1e-10


def test_bootstrap_is_nearly_fixed(G0, rc):
    TG = A.apply_T_approx(G0, rc.ctx)
    assert A.residual(G0, TG, rc.ctx) < 1e-30


def test_mean_value_bound_for_derivative(G0, rc):
    """T(G+h) - T(G) lies in DT(hull) h, the hull covering the segment."""
    ctx = rc.ctx
    h = [ctx.point(0)] * (rc.N + 1)
    h[3] = ctx.point("1e-9")
    h[7] = ctx.point("-3e-10")
    Gh = A.ApproxSeries(tuple(ctx.near.add(a, b) for a, b in zip(G0.coeffs, h)), rc.domain)
    diff = [ctx.near.sub(a, b) for a, b in zip(A.apply_T_approx(Gh, ctx).coeffs, A.apply_T_approx(G0, ctx).coeffs)]
    with local_context(ctx):
        hull = B.ball_inflate(G0.to_ball(ctx), "1.4e-9", ctx)
        hb = A.ApproxSeries(tuple(h), rc.domain).to_ball(ctx)
        img = apply_DT(hull, hb, rc)
    slack = Fraction(*img.err.as_integer_ratio()) + Fraction(1, 10**34)
    for k, (iv, x) in enumerate(zip(img.coeffs, diff)):
        assert within(iv, Fraction(*x.as_integer_ratio()), slack), k


def test_derivative_matrix_against_finite_differences(G0, rc):
    ctx = rc.ctx
    rows = A.derivative_matrix(G0, ctx)
    eps = ctx.point("1e-15")
    for j in (0, 2, 5):
        e = [ctx.point(0)] * (rc.N + 1)
        e[j] = eps
        Gp = A.ApproxSeries(tuple(ctx.near.add(a, b) for a, b in zip(G0.coeffs, e)), rc.domain)
        Gm = A.ApproxSeries(tuple(ctx.near.sub(a, b) for a, b in zip(G0.coeffs, e)), rc.domain)
        Tp, Tm = A.apply_T_approx(Gp, ctx).coeffs, A.apply_T_approx(Gm, ctx).coeffs
        for i in range(0, rc.N + 1, 7):
            fd = float(ctx.near.div(ctx.near.sub(Tp[i], Tm[i]), ctx.near.mul(2, eps)))
            assert fd == pytest.approx(float(rows[i][j]), rel=1e-9, abs=1e-12)


def test_arc_rectangle_contains_arc(ctx):
    mpmath.mp.prec = 200
    t = circle_angles(16, ctx)
    for j in range(16):
        R = arc_rectangle(0.5754, 0.8, t[j], t[j + 1], ctx)
        for s in (0.01, 0.25, 0.5, 0.75, 0.99):
            th = mpmath.mpf(str(t[j])) + s * (mpmath.mpf(str(t[j + 1])) - mpmath.mpf(str(t[j])))
            x = mpmath.mpf(0.5754) + mpmath.mpf(0.8) * mpmath.cos(th)
            y = mpmath.mpf(0.8) * mpmath.sin(th)
            assert R.re.contains(Fraction(str(x))) and R.im.contains(Fraction(str(y)))


def test_boundary_cover_closes_the_circle(ctx):
    t = circle_angles(8, ctx)
    assert t[0] == 0 and float(t[-1]) >= 2 * math.pi
    assert len(boundary_cover(Disc(0, 1), 8, ctx)) == 8


def test_domain_extension_on_omega(run, fixed_point, rc):
    with local_context(rc.ctx):
        res = check_domain_extension(fixed_point.enclosure, rc, 256)
    assert res.passed and res.witness is None and res.margin > 0
    assert run.payload("fixed-point")["domain_extension"]["passed"]


def test_domain_extension_fails_on_shrunk_disc(fixed_point, rc):
    small = Disc(rc.domain.center, float(rc.domain.radius) / 10)
    with local_context(rc.ctx):
        res = check_domain_extension(fixed_point.enclosure, rc, 256, domain=small)
    assert not res.passed
    assert res.witness is not None and res.stage


def test_domain_extension_pair(run, fixed_point):
    pc = run.cfg.pair()
    with local_context(pc.ctx):
        res = check_domain_extension_pair(SymmetricPairSource(fixed_point.enclosure, 4), pc, 256)
        bad = check_domain_extension_pair(
            SymmetricPairSource(fixed_point.enclosure, 4), pc, 256, domains=(Disc(-0.1, 0.07), Disc(0.85, 0.03))
        )
    assert res.passed and res.margin > 0
    assert not bad.passed and bad.witness is not None


def test_config_invariants(ctx):
    with pytest.raises(ValueError):
        RenormConfig(Disc(0.5754, 0.8), 40, 3, ctx)
    with pytest.raises(ValueError):
        RenormConfig(Disc(3, 0.5), 40, 4, ctx)
