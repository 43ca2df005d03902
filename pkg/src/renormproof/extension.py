"""Evaluation of the certified functions on real arguments far outside the disc.

Outside the domain the fixed-point and eigen-equations are used as
recurrences: every recursion step multiplies the inner argument by ``a^d``
(about 0.12 for d = 4), so after a few steps it lands in the region where
the balls are evaluated directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

from . import balls as B
from .balls import FunctionBall
from .interval import ArithContext, Interval, IntervalError, get_context


class ExtensionError(IntervalError):
    pass


@dataclass
class ExtendedEvaluator:
    """Recurrence-based evaluator for G, G', V and W.

    ``base_theta``: arguments whose chart image has modulus at most this are
    evaluated on the balls directly (derivatives need room to the boundary).
    ``depth``: default recursion budget.
    """

    G: FunctionBall
    d: int = 4
    V: FunctionBall | None = None
    delta: Interval | None = None
    W: FunctionBall | None = None
    gamma: Interval | None = None
    base_theta: float = 0.9
    depth: int = 6
    ctx: ArithContext | None = None

    def __post_init__(self):
        self.ctx = self.ctx or get_context()
        ctx = self.ctx
        self.a = B.ball_eval(self.G, Interval(1), ctx)
        if self.a.contains(0):
            raise ExtensionError("a = G(1) is not bounded away from 0")
        self.inv_a = ctx.inv(self.a)
        self.qa = ctx.pow(self.a, self.d)
        dom = self.G.domain
        reach = ctx.down.mul(dom.radius, ctx.convert(self.base_theta).lo)
        self.base = Interval(ctx.up.sub(dom.center, reach), ctx.down.add(dom.center, reach))
        self.max_width = ctx.down.div_2exp(dom.radius, 2)

    # -- helpers ----------------------------------------------------------
    def _pieces(self, x: Interval) -> Iterator[Interval]:
        """Split so every piece has width at most r/4."""
        w = float(self.ctx.up.sub(x.hi, x.lo))
        k = max(1, math.ceil(w / float(self.max_width)))
        if k == 1:
            yield x
            return
        near = self.ctx.near
        pts = [x.lo] + [near.add(x.lo, near.mul(near.sub(x.hi, x.lo), near.div(j, k))) for j in range(1, k)] + [x.hi]
        for j in range(k):
            yield Interval(pts[j], pts[j + 1])

    def _in_base(self, x: Interval) -> bool:
        return self.base.contains(x.lo) and self.base.contains(x.hi)

    def _split_eval(self, fn, x, depth, forced):
        out = None
        for piece in self._pieces(x):
            y = fn(piece, depth, forced)
            out = y if out is None else out.hull(y)
        return out

    def _check(self, depth):
        if depth <= 0:
            raise ExtensionError("recursion budget exhausted before reaching the disc")

    # -- G ---------------------------------------------------------------
    def eval_G(self, x: Interval, depth: int | None = None, forced: int = 0) -> Interval:
        """Enclosure of G(x) from ``G = a^-1 G(Q(G(Q(a) x)))``.

        ``forced`` recursion levels are applied even when x is in the base
        region (used for depth-consistency checks).
        """
        x = self.ctx.convert(x) if not isinstance(x, Interval) else x
        return self._split_eval(self._G, x, self.depth if depth is None else depth, forced)

    def _G(self, x, depth, forced):
        ctx = self.ctx
        if forced <= 0 and self._in_base(x):
            return B.ball_eval(self.G, x, ctx)
        self._check(depth)
        y1 = self._split_eval(self._G, ctx.mul(self.qa, x), depth - 1, forced - 1)
        z = ctx.pow(y1, self.d)
        return ctx.mul(self.inv_a, self._split_eval(self._G, z, depth - 1, forced - 1))

    def eval_Gprime(self, x: Interval, depth: int | None = None, forced: int = 0) -> Interval:
        """``G'(x) = a^-1 G'(z) Q'(y1) G'(Q(a) x) Q(a)``."""
        x = self.ctx.convert(x) if not isinstance(x, Interval) else x
        return self._split_eval(self._Gp, x, self.depth if depth is None else depth, forced)

    def _Gp(self, x, depth, forced):
        ctx = self.ctx
        if forced <= 0 and self._in_base(x):
            return B.ball_eval_derivative(self.G, x, ctx)
        self._check(depth)
        ax = ctx.mul(self.qa, x)
        y1 = self._split_eval(self._G, ax, depth - 1, forced - 1)
        z = ctx.pow(y1, self.d)
        gz = self._split_eval(self._Gp, z, depth - 1, forced - 1)
        gx = self._split_eval(self._Gp, ax, depth - 1, forced - 1)
        dq = ctx.mul(Interval(self.d), ctx.pow(y1, self.d - 1))
        return ctx.mul(ctx.mul(ctx.mul(self.inv_a, gz), ctx.mul(dq, gx)), self.qa)

    # -- eigenfunctions ---------------------------------------------------------
    def eval_V(self, x: Interval, depth: int | None = None, forced: int = 0) -> Interval:
        """``V = delta^-1 [V(1) Ba + a^-1 V(z) + K V(Q(a) x)]``."""
        if self.V is None or self.delta is None:
            raise ExtensionError("no V ball / delta enclosure supplied")
        x = self.ctx.convert(x) if not isinstance(x, Interval) else x
        return self._split_eval(self._V, x, self.depth if depth is None else depth, forced)

    def _V(self, x, depth, forced):
        ctx = self.ctx
        if forced <= 0 and self._in_base(x):
            return B.ball_eval(self.V, x, ctx)
        self._check(depth)
        ax = ctx.mul(self.qa, x)
        y1 = self._split_eval(self._G, ax, depth - 1, forced - 1)
        z = ctx.pow(y1, self.d)
        K = ctx.mul(
            ctx.mul(self.inv_a, self._split_eval(self._Gp, z, depth - 1, forced - 1)),
            ctx.mul(Interval(self.d), ctx.pow(y1, self.d - 1)),
        )
        A = self._split_eval(self._G, z, depth - 1, forced - 1)
        gp1 = self._split_eval(self._Gp, ax, depth - 1, forced - 1)
        # Ba = -a^-2 A + K G'(Q(a) x) d a^(d-1) x
        da = ctx.mul(Interval(self.d), ctx.pow(self.a, self.d - 1))
        Ba = ctx.sub(ctx.mul(K, ctx.mul(gp1, ctx.mul(da, x))), ctx.mul(ctx.pow(self.inv_a, 2), A))
        v1 = B.ball_eval(self.V, Interval(1), ctx)
        vz = self._split_eval(self._V, z, depth - 1, forced - 1)
        vx = self._split_eval(self._V, ax, depth - 1, forced - 1)
        s = ctx.add(ctx.add(ctx.mul(v1, Ba), ctx.mul(self.inv_a, vz)), ctx.mul(K, vx))
        return ctx.div(s, self.delta)

    def eval_W(self, x: Interval, depth: int | None = None, forced: int = 0) -> Interval:
        """``W = gamma^-2 [a^-2 W(z) + K^2 W(Q(a) x)]``."""
        if self.W is None or self.gamma is None:
            raise ExtensionError("no W ball / gamma enclosure supplied")
        x = self.ctx.convert(x) if not isinstance(x, Interval) else x
        return self._split_eval(self._W, x, self.depth if depth is None else depth, forced)

    def _W(self, x, depth, forced):
        ctx = self.ctx
        if forced <= 0 and self._in_base(x):
            return B.ball_eval(self.W, x, ctx)
        self._check(depth)
        ax = ctx.mul(self.qa, x)
        y1 = self._split_eval(self._G, ax, depth - 1, forced - 1)
        z = ctx.pow(y1, self.d)
        K = ctx.mul(
            ctx.mul(self.inv_a, self._split_eval(self._Gp, z, depth - 1, forced - 1)),
            ctx.mul(Interval(self.d), ctx.pow(y1, self.d - 1)),
        )
        wz = self._split_eval(self._W, z, depth - 1, forced - 1)
        wx = self._split_eval(self._W, ax, depth - 1, forced - 1)
        s = ctx.add(ctx.mul(ctx.pow(self.inv_a, 2), wz), ctx.mul(ctx.pow(K, 2), wx))
        return ctx.div(s, ctx.pow(self.gamma, 2))

    # -- g-form ------------------------------------------------------------
    def evaluate(self, which: str, x: Interval, depth: int | None = None) -> Interval:
        """``which`` in G, g, Gp, V, v, W, w; lower-case variants use ``x^d``."""
        ctx = self.ctx
        x = ctx.convert(x) if not isinstance(x, Interval) else x
        fns = {"G": self.eval_G, "Gp": self.eval_Gprime, "V": self.eval_V, "W": self.eval_W}
        if which in ("g", "v", "w"):
            return fns[which.upper()](ctx.pow(x, self.d), depth)
        if which not in fns:
            raise ValueError(f"unknown function {which!r}")
        return fns[which](x, depth)


PLOT_FUNCTIONS = ("G", "g", "V", "v", "W", "w")


def emit_plot_data(ev: ExtendedEvaluator, which: str, lo, hi, samples: int, path=None, depth=None, delimiter="\t", meta=None):
    """Covering of ``which`` on [lo, hi] by ``samples`` rectangles.

    Rows are ``x_lo x_hi y_lo y_hi`` (the x break points are doubles; y bounds are
    rounded outward to doubles) after ``#`` header lines.  Returns the rows; writes
    them to ``path`` when given.
    """
    if which not in PLOT_FUNCTIONS:
        raise ValueError(f"which must be one of {PLOT_FUNCTIONS}")
    if samples < 1:
        raise ValueError("samples must be positive")
    ctx = ev.ctx
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ValueError("need lo < hi")
    # break points are doubles so the printed x columns are exact
    pts = [lo + (hi - lo) * j / samples for j in range(samples)] + [hi]
    rows = []
    for j in range(samples):
        x = Interval(pts[j], pts[j + 1])
        y = ev.evaluate(which, x, depth)
        rows.append((float(x.lo), float(x.hi), _down(y.lo), _up(y.hi)))
    if path is not None:
        header = {"function": which, "N": ev.G.degree, "precision": ctx.precision, "depth": depth or ev.depth}
        header.update(meta or {})
        with open(path, "w") as fh:
            for k, v in header.items():
                fh.write(f"# {k}: {v}\n")
            fh.write("# columns: x_lo x_hi y_lo y_hi\n")
            for r in rows:
                fh.write(delimiter.join(repr(v) for v in r) + "\n")
    return rows


def _down(x) -> float:
    f = float(x)
    return f if f <= x else math.nextafter(f, -math.inf)


def _up(x) -> float:
    f = float(x)
    return f if f >= x else math.nextafter(f, math.inf)
