"""Renormalisation operators on function balls.

For the symmetric reduction ``g = G o Q`` with ``Q(x) = x**d`` the doubling
operator acts as

    T G(X) = a^-1 G(Q(G(Q(a) X))),   a = G(1),

and on the pair representation ``g = (g_0 on Omega_0, g_1 on Omega_1)`` as
``R g(x) = a^-1 g(g(a x))`` with ``a = g_1(1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from gmpy2 import mpfr

from . import balls as B
from .balls import CompositionDomainError, Disc, FunctionBall, PairBall
from .interval import ArithContext, Interval, IntervalError, Rectangle, get_context, neg


class RoutingError(IntervalError):
    """An image could not be placed inside either pair disc."""


@dataclass(frozen=True)
class RenormConfig:
    domain: Disc
    N: int
    d: int = 4
    ctx: ArithContext = field(default_factory=get_context)

    def __post_init__(self):
        if self.d < 2 or self.d % 2:
            raise ValueError("critical degree d must be an even integer >= 2")
        if self.N < 1:
            raise ValueError("truncation degree must be >= 1")
        for p in (0, 1):
            if not self.domain.contains_point(p):
                raise ValueError(f"{p} must lie in the domain {self.domain}")


@dataclass(frozen=True)
class PairConfig:
    domain0: Disc
    domain1: Disc
    N: int
    ctx: ArithContext = field(default_factory=get_context)

    def __post_init__(self):
        if not self.domain0.contains_point(0):
            raise ValueError("0 must lie in Omega_0")
        if not self.domain1.contains_point(1):
            raise ValueError("1 must lie in Omega_1")
        if not self.domain0.overlaps(self.domain1):
            raise ValueError("pair domains must overlap")

    @property
    def domains(self) -> tuple[Disc, Disc]:
        return (self.domain0, self.domain1)


def scaling_constant(G: FunctionBall, ctx: ArithContext | None = None) -> Interval:
    """Enclosure of ``a = G(1)`` over the ball."""
    return B.ball_eval(G, Interval(1), ctx)


def _q_parts(y: FunctionBall, d: int, ctx):
    """``(Q(y), Q'(y))`` sharing the square chain; ``x**4`` is two squarings."""
    if d == 4:
        s = B.ball_mul(y, y, ctx)
        q = B.ball_mul(s, s, ctx)
        qp = B.ball_scale(B.ball_mul(s, y, ctx), Interval(4), ctx)
        return q, qp
    q = B.ball_pow(y, d, ctx)
    qp = B.ball_scale(B.ball_pow(y, d - 1, ctx), Interval(d), ctx)
    return q, qp


class TContext:
    """Shared subexpressions of ``T`` and ``DT`` at a ball G.

    Attributes follow the nesting ``X -> Q(a)X -> y1 = G(Q(a)X) -> z = Q(y1)``:
    ``arg`` is the affine ball ``Q(a)X``, ``w1``/``theta1`` its chart image in
    Omega and l1 bound, ``w2``/``theta2`` the same for ``z``.
    """

    def __init__(self, G: FunctionBall, cfg: RenormConfig):
        ctx = cfg.ctx
        if G.domain != cfg.domain or G.degree != cfg.N:
            raise B.BallError("ball does not match the configuration")
        self.G = G
        self.cfg = cfg
        dom, N, d = cfg.domain, cfg.N, cfg.d
        self.a = scaling_constant(G, ctx)
        self.inv_a = ctx.inv(self.a)
        self.qa = ctx.pow(self.a, d)
        self.arg = B.ball_affine(self.qa, dom, N, ctx)
        self.w1, self.theta1 = B.compose_margin(dom, self.arg, ctx)
        self.y1 = B.ball_compose(G, self.arg, ctx, recharted=(self.w1, self.theta1))
        self.z, self.Qp1 = _q_parts(self.y1, d, ctx)
        self.w2, self.theta2 = B.compose_margin(dom, self.z, ctx)
        self.A = B.ball_compose(G, self.z, ctx, recharted=(self.w2, self.theta2))
        self._derivs = None
        self._powers = None

    def image(self) -> FunctionBall:
        return B.ball_scale(self.A, self.inv_a, self.cfg.ctx)

    def _derivative_terms(self):
        if self._derivs is None:
            ctx = self.cfg.ctx
            G, N, dom, d = self.G, self.cfg.N, self.cfg.domain, self.cfg.d
            Gp2 = B.ball_derivative_compose(G, self.z, ctx, recharted=(self.w2, self.theta2))
            Gp1 = B.ball_derivative_compose(G, self.arg, ctx, recharted=(self.w1, self.theta1))
            K = B.ball_scale(B.ball_mul(Gp2, self.Qp1, ctx), self.inv_a, ctx)
            qpa = ctx.mul(Interval(d), ctx.pow(self.a, d - 1))
            X = B.ball_identity(dom, N)
            tail = B.ball_scale(B.ball_mul(B.ball_mul(K, Gp1, ctx), X, ctx), qpa, ctx)
            lead = B.ball_scale(self.A, ctx.neg(ctx.pow(self.inv_a, 2)), ctx)
            self._derivs = {"Gp1": Gp1, "Gp2": Gp2, "K": K, "Ba": B.ball_add(lead, tail, ctx)}
        return self._derivs

    @property
    def K(self) -> FunctionBall:
        return self._derivative_terms()["K"]

    @property
    def Ba(self) -> FunctionBall:
        """Coefficient of ``delta a`` in DT."""
        return self._derivative_terms()["Ba"]

    @property
    def Gp1(self) -> FunctionBall:
        return self._derivative_terms()["Gp1"]

    @property
    def Gp2(self) -> FunctionBall:
        return self._derivative_terms()["Gp2"]

    def basis_powers(self):
        """Chart powers ``w1**k`` and ``w2**k`` for k = 0..N (images of e_k)."""
        if self._powers is None:
            ctx = self.cfg.ctx
            self._powers = (B.ball_powers(self.w1, self.cfg.N, ctx), B.ball_powers(self.w2, self.cfg.N, ctx))
        return self._powers

    def psi_one(self) -> Interval:
        return self.cfg.domain.chart(Interval(1), self.cfg.ctx)

    def combine(self, da: Interval, dG_outer: FunctionBall, dG_inner: FunctionBall) -> FunctionBall:
        """``da*Ba + a^-1 dG(z) + K dG(Q(a)X)`` from the three pieces."""
        ctx = self.cfg.ctx
        t = B.ball_scale(self.Ba, da, ctx)
        t = B.ball_add(t, B.ball_scale(dG_outer, self.inv_a, ctx), ctx)
        return B.ball_add(t, B.ball_mul(self.K, dG_inner, ctx), ctx)

    def apply(self, dG: FunctionBall) -> FunctionBall:
        ctx = self.cfg.ctx
        da = B.ball_eval(dG, Interval(1), ctx)
        outer = B.ball_compose(dG, self.z, ctx, recharted=(self.w2, self.theta2))
        inner = B.ball_compose(dG, self.arg, ctx, recharted=(self.w1, self.theta1))
        return self.combine(da, outer, inner)

    def apply_basis(self, k: int) -> FunctionBall:
        """``DT(G) E_k`` using the precomputed chart powers."""
        p1, p2 = self.basis_powers()
        da = self.cfg.ctx.pow(self.psi_one(), k)
        return self.combine(da, p2[k], p1[k])

    def apply_high_order(self) -> FunctionBall:
        """``DT(G) E_H`` for the hull of unit-norm high-order functions."""
        ctx = self.cfg.ctx
        N = self.cfg.N
        EH = B.ball_high_order_unit(self.cfg.domain, N)
        m = ctx.up.pow(self.psi_one().mag(), N + 1)
        da = Interval(neg(m), m)
        outer = B.ball_compose(EH, self.z, ctx, recharted=(self.w2, self.theta2))
        inner = B.ball_compose(EH, self.arg, ctx, recharted=(self.w1, self.theta1))
        return self.combine(da, outer, inner)


def apply_T(G: FunctionBall, cfg: RenormConfig, context: TContext | None = None) -> FunctionBall:
    """Ball enclosing ``T(G')`` for every member ``G'`` of ``G``."""
    context = context or TContext(G, cfg)
    return context.image()


def apply_DT(G: FunctionBall, dG: FunctionBall, cfg: RenormConfig, context: TContext | None = None) -> FunctionBall:
    """Ball enclosing ``DT(G')dG'`` over members of both balls."""
    context = context or TContext(G, cfg)
    return context.apply(dG)


# ---------------------------------------------------------------------------
# boundary coverings


def arc_rectangle(center, radius, t0, t1, ctx: ArithContext | None = None) -> Rectangle:
    """Rectangle containing the arc ``center + radius e^{it}``, ``t0 <= t <= t1``.

    ``t0, t1`` must be representable with ``t1 - t0 < pi``.  The hull of the
    endpoints is widened by the sagitta bound ``radius (t1 - t0)**2 / 8``.
    """
    ctx = ctx or get_context()
    up = ctx.up
    phi = up.sub(t1, t0)
    rad = Interval(radius) if not isinstance(radius, Interval) else radius
    sag = up.div(up.mul(rad.hi, up.mul(phi, phi)), 8)
    pad = Interval(neg(sag), sag)
    c0, s0 = ctx.cos_sin(t0)
    c1, s1 = ctx.cos_sin(t1)
    c = center if isinstance(center, Interval) else ctx.convert(center)
    re = ctx.add(ctx.add(c, ctx.mul(rad, c0.hull(c1))), pad)
    im = ctx.add(ctx.mul(rad, s0.hull(s1)), pad)
    return Rectangle(re, im)


def circle_angles(K: int, ctx: ArithContext | None = None) -> list:
    """K+1 representable angles from 0 to an upper bound of 2 pi."""
    ctx = ctx or get_context()
    if K < 4:
        raise ValueError("use at least 4 arcs so every arc is shorter than pi")
    near, up = ctx.near, ctx.up
    total = up.mul_2exp(up.const_pi(), 1)
    return [near.div(near.mul(total, j), K) for j in range(K)] + [total]


def boundary_cover(disc: Disc, K: int, ctx: ArithContext | None = None) -> list[Rectangle]:
    """K rectangles covering the circle ``|x - c| = r`` (equal-angle arcs)."""
    ctx = ctx or get_context()
    if K < 1:
        raise ValueError("covering count must be positive")
    t = circle_angles(K, ctx)
    return [arc_rectangle(disc.center, disc.radius, t[j], t[j + 1], ctx) for j in range(K)]


def disc_margin(disc: Disc, z: Rectangle, ctx: ArithContext | None = None) -> mpfr:
    """Lower bound of ``r - |z' - c|`` over the rectangle (positive: inside)."""
    ctx = ctx or get_context()
    shifted = Rectangle(ctx.sub(z.re, Interval(disc.center)), z.im)
    return ctx.down.sub(disc.radius, ctx.rabs_upper(shifted))


@dataclass
class DomainExtensionResult:
    passed: bool
    margin: float
    K: int
    witness: int | None = None
    stage: str | None = None
    margins: tuple = ()

    def __bool__(self):
        return self.passed


def _rect_pow(ctx, z: Rectangle, d: int) -> Rectangle:
    if d == 4:
        return ctx.rsquare(ctx.rsquare(z))
    return ctx.rpow(z, d)


def check_domain_extension(G: FunctionBall, cfg: RenormConfig, K: int = 256, domain: Disc | None = None) -> DomainExtensionResult:
    """Verify ``Q(a) closure(W)`` and ``Q(G(Q(a) closure(W)))`` lie in W.

    ``W`` is ``domain`` when given (G is still evaluated on its own ball),
    otherwise the configured Omega.  By the maximum principle it suffices to
    check the images of a covering of the boundary circle.
    """
    ctx = cfg.ctx
    W = domain or cfg.domain
    a = scaling_constant(G, ctx)
    qa = ctx.pow(a, cfg.d)
    worst = None
    m1s, m2s = [], []
    for j, R in enumerate(boundary_cover(W, K, ctx)):
        inner = ctx.rscale(qa, R)
        m1 = disc_margin(W, inner, ctx)
        m1s.append(m1)
        if m1 <= 0:
            return DomainExtensionResult(False, float(m1), K, j, "Q(a)X")
        try:
            y = B.ball_eval(G, inner, ctx)
        except CompositionDomainError:
            return DomainExtensionResult(False, float(m1), K, j, "G(Q(a)X) evaluation")
        m2 = disc_margin(W, _rect_pow(ctx, y, cfg.d), ctx)
        m2s.append(m2)
        if m2 <= 0:
            return DomainExtensionResult(False, float(m2), K, j, "Q(G(Q(a)X))")
        w = min(m1, m2)
        worst = w if worst is None else min(worst, w)
    return DomainExtensionResult(True, float(worst), K, margins=(float(min(m1s)), float(min(m2s))))


# ---------------------------------------------------------------------------
# pair representation


class SymmetricPairSource:
    """Rigorous evaluation of ``g = G o Q`` through a verified G ball.

    Usable wherever the argument's d-th power lies in G's disc; this covers
    the inner images ``a x`` needed by the pair domain-extension check.
    """

    def __init__(self, G: FunctionBall, d: int = 4):
        self.G = G
        self.d = d

    def scaling(self, ctx=None) -> Interval:
        return scaling_constant(self.G, ctx)

    def eval_rect(self, z: Rectangle, ctx=None) -> Rectangle:
        ctx = ctx or get_context()
        return B.ball_eval(self.G, _rect_pow(ctx, z, self.d), ctx)


def route(parts, ball: FunctionBall, prefer: int, ctx) -> tuple[int, tuple]:
    """Pick the pair part whose disc provably contains the image ``ball``."""
    options = {}
    for j, part in enumerate(parts):
        w, theta = B.compose_margin(part.domain, ball, ctx)
        if theta < 1:
            options[j] = (w, theta)
    if not options:
        raise RoutingError("image leaves both pair discs")
    j = prefer if prefer in options else next(iter(options))
    return j, options[j]


def _pair_parts(g: PairBall):
    return (g.part0, g.part1)


def apply_R_pair(g: PairBall, cfg: PairConfig) -> PairBall:
    """``R g = a^-1 g(g(a x))`` part by part, ``a = g_1(1)``."""
    ctx = cfg.ctx
    parts = _pair_parts(g)
    a = B.ball_eval(g.part1, Interval(1), ctx)
    inv_a = ctx.inv(a)
    out = []
    for dom in cfg.domains:
        ax = B.ball_affine(a, dom, cfg.N, ctx)
        i, rc = route(parts, ax, 0, ctx)
        inner = B.ball_compose(parts[i], ax, ctx, recharted=rc)
        o, rc2 = route(parts, inner, 1, ctx)
        outer = B.ball_compose(parts[o], inner, ctx, recharted=rc2)
        out.append(B.ball_scale(outer, inv_a, ctx))
    return PairBall(*out)


def apply_DR_pair(g: PairBall, dg: PairBall, cfg: PairConfig) -> PairBall:
    """Frechet derivative of R at g applied to dg, part by part."""
    ctx = cfg.ctx
    parts = _pair_parts(g)
    dparts = _pair_parts(dg)
    a = B.ball_eval(g.part1, Interval(1), ctx)
    da = B.ball_eval(dg.part1, Interval(1), ctx)
    inv_a = ctx.inv(a)
    out = []
    for dom in cfg.domains:
        ax = B.ball_affine(a, dom, cfg.N, ctx)
        i, rc = route(parts, ax, 0, ctx)
        inner = B.ball_compose(parts[i], ax, ctx, recharted=rc)
        o, rc2 = route(parts, inner, 1, ctx)
        ff = B.ball_compose(parts[o], inner, ctx, recharted=rc2)
        fp_outer = B.ball_derivative_compose(parts[o], inner, ctx, recharted=rc2)
        fp_inner = B.ball_derivative_compose(parts[i], ax, ctx, recharted=rc)
        dff = B.ball_compose(dparts[o], inner, ctx, recharted=rc2)
        dfa = B.ball_compose(dparts[i], ax, ctx, recharted=rc)
        X = B.ball_identity(dom, cfg.N)
        t = B.ball_scale(ff, ctx.neg(ctx.mul(ctx.pow(inv_a, 2), da)), ctx)
        t = B.ball_add(t, B.ball_scale(dff, inv_a, ctx), ctx)
        t = B.ball_add(t, B.ball_scale(B.ball_mul(fp_outer, dfa, ctx), inv_a, ctx), ctx)
        last = B.ball_mul(B.ball_mul(fp_outer, fp_inner, ctx), X, ctx)
        t = B.ball_add(t, B.ball_scale(last, ctx.mul(inv_a, da), ctx), ctx)
        out.append(t)
    return PairBall(*out)


def check_domain_extension_pair(
    g,
    cfg: PairConfig,
    K: int = 256,
    domains: tuple[Disc, Disc] | None = None,
) -> DomainExtensionResult:
    """Verify ``a closure(W) in W_0`` and ``g(a closure(W)) in W_1``.

    ``W = W_0 u W_1``; both boundary circles are covered.  ``g`` is a
    :class:`PairBall` (inner values routed through part 0) or a
    :class:`SymmetricPairSource`.
    """
    ctx = cfg.ctx
    W0, W1 = domains or cfg.domains
    if isinstance(g, PairBall):
        a = B.ball_eval(g.part1, Interval(1), ctx)

        def evaluate(z):
            return B.ball_eval(g.part0, z, ctx)
    elif isinstance(g, SymmetricPairSource):
        a = g.scaling(ctx)

        def evaluate(z):
            return g.eval_rect(z, ctx)
    else:
        raise TypeError("g must be a PairBall or SymmetricPairSource")
    worst = None
    m1s, m2s = [], []
    idx = 0
    for W in (W0, W1):
        for R in boundary_cover(W, K, ctx):
            inner = ctx.rscale(a, R)
            m1 = disc_margin(W0, inner, ctx)
            m1s.append(m1)
            if m1 <= 0:
                return DomainExtensionResult(False, float(m1), K, idx, "a X in Omega_0")
            try:
                y = evaluate(inner)
            except CompositionDomainError:
                return DomainExtensionResult(False, float(m1), K, idx, "g(a X) evaluation")
            m2 = disc_margin(W1, y, ctx)
            m2s.append(m2)
            if m2 <= 0:
                return DomainExtensionResult(False, float(m2), K, idx, "g(a X) in Omega_1")
            w = min(m1, m2)
            worst = w if worst is None else min(worst, w)
            idx += 1
    return DomainExtensionResult(True, float(worst), K, margins=(float(min(m1s)), float(min(m2s))))
