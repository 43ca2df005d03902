"""Quasi-Newton contraction proofs on function balls.

A scheme supplies a map ``F`` (the fixed-point residual or an eigen-residual)
and a fixed invertible operator ``Lambda``; the quasi-Newton map is
``Phi(X) = X - Lambda F(X)``.  With ``B1 = B(X0; 0, rho)``,

    eps   >= ||Phi(X0) - X0||,
    kappa >= sup_{X in B1} ||D Phi(X)||   (max over E_0..E_N and E_H),

the inequality ``eps < rho (1 - kappa)`` proves ``Phi(B1) ⊂ B1`` and that
``Phi`` contracts there, so ``B1`` holds a unique zero of ``F``.
"""

from __future__ import annotations

import concurrent.futures as cf
import time
from dataclasses import dataclass, field
from typing import Callable

from gmpy2 import mpfr

from . import balls as B
from .balls import FunctionBall
from .interval import ArithContext, Interval, exact_decimal, get_context, local_context
from .linalg import IntervalMatrix, matvec_endpoints, verified_inverse
from .renorm import RenormConfig, TContext

_ZERO = mpfr(0)


@dataclass(frozen=True)
class LinearAction:
    """``Lambda = matrix`` on the polynomial part and ``high * I`` above N."""

    matrix: IntervalMatrix
    high: Interval
    beta: float = 0.0  # inverse-enclosure residual bound, for the record

    def norm_upper(self, ctx: ArithContext | None = None) -> mpfr:
        ctx = ctx or get_context()
        return max(self.matrix.col_norm_upper(ctx), self.high.mag())

    def apply(self, f: FunctionBall, ctx: ArithContext | None = None) -> FunctionBall:
        """Ball enclosing ``Lambda f'`` for every member f'."""
        ctx = ctx or get_context()
        lo, hi = matvec_endpoints(self.matrix, f.lo, f.up, ctx)
        u = ctx.up
        return FunctionBall(f.domain, lo, hi, u.mul(f.hi, self.high.mag()), u.mul(f.err, self.norm_upper(ctx)))


def build_lambda(A_rows, high: Interval, ctx: ArithContext, candidate=None) -> LinearAction:
    """Lambda as the verified inverse of the exact point matrix ``A_rows``.

    The operator used is exactly ``A^-1`` on P (invertible by construction
    once the residual bound beta < 1 is verified); the stored interval
    matrix encloses it.
    """
    from .approx import inverse

    A = IntervalMatrix.from_points(A_rows, ctx)
    if not A.is_point():
        raise ValueError("Lambda must be the inverse of a representable point matrix")
    X = candidate if candidate is not None else inverse(A_rows, ctx)
    vi = verified_inverse(A, X, ctx)
    return LinearAction(vi.matrix, high, vi.beta)


@dataclass
class ProofCertificate:
    scheme: str
    N: int
    precision: int
    domain: B.Disc
    epsilon: float
    rho: float
    kappa: float
    verified: bool
    enclosure: FunctionBall | None = None
    constants: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    epsilon_exact: str = ""
    kappa_exact: str = ""
    rho_exact: str = ""
    # tighter set known to contain the solution: Phi(X0) widened by kappa*r,
    # r = eps / (1 - kappa) bounding the distance of the solution from X0
    refined: FunctionBall | None = None
    radius_exact: str = ""

    def summary_line(self) -> str:
        return (
            f"{self.scheme} verified={self.verified} "
            f"eps={self.epsilon:.3e} rho={self.rho:.1e} kappa={self.kappa:.3e}"
        )

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "scheme": self.scheme,
            "N": self.N,
            "precision_bits": self.precision,
            "domain": self.domain.to_dict(),
            "epsilon": self.epsilon_exact,
            "rho": self.rho_exact,
            "kappa": self.kappa_exact,
            "verified": self.verified,
            "enclosure": self.enclosure.to_dict() if self.enclosure is not None else None,
            "constants": {k: v.to_strings() for k, v in self.constants.items()},
            "diagnostics": self.diagnostics,
            "refined": self.refined.to_dict() if self.refined is not None else None,
            "radius": self.radius_exact,
        }

    @classmethod
    def from_dict(cls, data, ctx: ArithContext | None = None) -> "ProofCertificate":
        ctx = ctx or get_context()
        enc = data.get("enclosure")
        ref = data.get("refined")
        return cls(
            scheme=data["scheme"],
            N=data["N"],
            precision=data["precision_bits"],
            domain=B.Disc.from_dict(data["domain"]),
            epsilon=float(data["epsilon"]),
            rho=float(data["rho"]),
            kappa=float(data["kappa"]),
            verified=bool(data["verified"]),
            enclosure=FunctionBall.from_dict(enc, ctx) if enc else None,
            constants={k: Interval.from_strings(v, ctx) for k, v in data["constants"].items()},
            diagnostics=data.get("diagnostics", {}),
            epsilon_exact=data["epsilon"],
            kappa_exact=data["kappa"],
            rho_exact=data["rho"],
            refined=FunctionBall.from_dict(ref, ctx) if ref else None,
            radius_exact=data.get("radius", ""),
        )


class QuasiNewtonScheme:
    """Base class; subclasses define the residual and the derivative columns."""

    name = "scheme"

    def __init__(self, center: FunctionBall, lam: LinearAction, ctx: ArithContext):
        if not center.is_singleton():
            raise ValueError("the scheme center must be a singleton ball")
        self.center = center
        self.lam = lam
        self.ctx = ctx

    @property
    def N(self) -> int:
        return self.center.degree

    @property
    def domain(self) -> B.Disc:
        return self.center.domain

    # -- to override -------------------------------------------------------
    def residual(self) -> FunctionBall:
        """Ball enclosing ``F(X0)``."""
        raise NotImplementedError

    def prepare(self, rho) -> object:
        """Per-rho state shared by all derivative columns."""
        raise NotImplementedError

    def poly_column(self, state, k: int) -> FunctionBall:
        raise NotImplementedError

    def high_column(self, state) -> FunctionBall:
        """Dependency-safe ``D Phi(B1) E_H``."""
        raise NotImplementedError

    def naive_high_column(self, state) -> FunctionBall:
        """``D Phi(B1) E_H`` evaluated literally from the generic formula."""
        raise NotImplementedError

    def constants(self, enclosure: FunctionBall) -> dict:
        return {}

    # -------------------------------------------------------------------------
    def phi_step(self) -> FunctionBall:
        """``Phi(X0) - X0 = -Lambda F(X0)`` (no subtraction of X0 needed)."""
        return B.ball_scale(self.lam.apply(self.residual(), self.ctx), Interval(-1), self.ctx)

    def inflate(self, rho) -> FunctionBall:
        return B.ball_inflate(self.center, rho, self.ctx)

    def unit(self, k: int | None) -> FunctionBall:
        if k is None:
            return B.ball_high_order_unit(self.domain, self.N)
        return B.ball_monomial(k, self.domain, self.N)

    def column_norm(self, state, k) -> mpfr:
        col = self.high_column(state) if k is None else self.poly_column(state, k)
        return B.ball_norm_upper(col, self.ctx)


def bound_epsilon(scheme: QuasiNewtonScheme, step: FunctionBall | None = None) -> mpfr:
    """Upper bound of ``||Phi(X0) - X0||``."""
    step = step if step is not None else scheme.phi_step()
    return B.ball_norm_upper(step, scheme.ctx)


def refine_enclosure(scheme: QuasiNewtonScheme, step: FunctionBall, eps, kappa) -> tuple[FunctionBall, mpfr]:
    """Ball containing the fixed point, tighter than the rho-ball.

    The fixed point X* satisfies ||X* - X0|| <= r = eps / (1 - kappa), and
    X* = Phi(X*) lies in Phi(X0) plus a general error of norm kappa * r
    (mean value bound on the convex rho-ball).
    """
    ctx = scheme.ctx
    r = ctx.up.div(eps, ctx.down.sub(1, kappa))
    base = B.ball_add(scheme.center, step, ctx)
    extra = ctx.up.mul(kappa, r)
    return B.FunctionBall(base.domain, base.lo, base.up, base.hi, ctx.up.add(base.err, extra)), r


_WORKER = {}


def _worker_init(scheme, rho):
    _WORKER["scheme"] = scheme
    _WORKER["state"] = scheme.prepare(rho)


def _worker_column(k):
    s = _WORKER["scheme"]
    with local_context(s.ctx):
        return k, s.column_norm(_WORKER["state"], k)


@dataclass
class KappaBound:
    kappa: mpfr
    columns: dict  # index (None = high order) -> norm bound
    worst: object

    def __float__(self):
        return float(self.kappa)


def bound_kappa(scheme: QuasiNewtonScheme, rho, workers: int = 1, state=None) -> KappaBound:
    """Max over the N+2 column norms of ``D Phi(B1)``.

    With ``workers > 1`` the columns are distributed over processes, each
    holding its own arithmetic context; results are identical to the serial
    run since every column is a deterministic pure computation.
    """
    rho = scheme.ctx.convert(rho).hi
    indices = list(range(scheme.N + 1)) + [None]
    cols = {}
    if workers <= 1:
        state = state if state is not None else scheme.prepare(rho)
        for k in indices:
            try:
                cols[k] = scheme.column_norm(state, k)
            except Exception as exc:  # name the offending column
                raise type(exc)(f"column {'H' if k is None else k}: {exc}") from exc
    else:
        with cf.ProcessPoolExecutor(max_workers=workers, initializer=_worker_init, initargs=(scheme, rho)) as pool:
            for k, v in pool.map(_worker_column, indices):
                cols[k] = v
    worst = max(indices, key=lambda k: cols[k])
    return KappaBound(cols[worst], cols, worst)


def verify_contraction(scheme: QuasiNewtonScheme, rho, workers: int = 1) -> ProofCertificate:
    ctx = scheme.ctx
    with local_context(ctx):
        t0 = time.time()
        rho_u = ctx.convert(rho).hi
        step = scheme.phi_step()
        eps = bound_epsilon(scheme, step)
        t1 = time.time()
        kb = bound_kappa(scheme, rho_u, workers)
        t2 = time.time()
        kappa = kb.kappa
        # eps < rho (1 - kappa), evaluated with the right-hand side rounded down
        rhs = ctx.down.mul(ctx.convert(rho).lo, ctx.down.sub(1, kappa))
        ok = bool(kappa < 1 and eps < rhs)
        enclosure = scheme.inflate(rho) if ok else None
        refined, radius = refine_enclosure(scheme, step, eps, kappa) if ok else (None, None)
        diag = {
            "worst_column": "H" if kb.worst is None else kb.worst,
            "high_order_column": float(kb.columns[None]),
            "margin": float(ctx.down.sub(rhs, eps)) if kappa < 1 else None,
            "seconds_epsilon": round(t1 - t0, 3),
            "seconds_kappa": round(t2 - t1, 3),
        }
        cert = ProofCertificate(
            scheme=scheme.name,
            N=scheme.N,
            precision=ctx.precision,
            domain=scheme.domain,
            epsilon=float(eps),
            rho=float(ctx.convert(rho).hi),
            kappa=float(kappa),
            verified=ok,
            enclosure=enclosure,
            constants=scheme.constants(refined) if ok else {},
            diagnostics=diag,
            epsilon_exact=exact_decimal(eps),
            kappa_exact=exact_decimal(kappa),
            rho_exact=str(rho),
            refined=refined,
            radius_exact=exact_decimal(radius) if ok else "",
        )
    return cert


# ---------------------------------------------------------------------------
# the fixed-point scheme


class FixedPointScheme(QuasiNewtonScheme):
    """``Phi(G) = G - Lambda (T G - G)``, Lambda = (Delta_PP - I)^-1 (+) (-I)."""

    name = "fixed-point"

    def __init__(self, G0: FunctionBall, lam: LinearAction, cfg: RenormConfig):
        super().__init__(G0, lam, cfg.ctx)
        self.cfg = cfg

    def residual(self) -> FunctionBall:
        TB = TContext(self.center, self.cfg).image()
        return B.ball_sub(TB, self.center, self.ctx)

    def prepare(self, rho):
        return TContext(self.inflate(rho), self.cfg)

    def poly_column(self, state: TContext, k: int) -> FunctionBall:
        ctx = self.ctx
        Ek = self.unit(k)
        inner = B.ball_sub(state.apply_basis(k), Ek, ctx)
        return B.ball_sub(Ek, self.lam.apply(inner, ctx), ctx)

    def high_column(self, state: TContext) -> FunctionBall:
        # E_H - Lambda(DT E_H - E_H) = -Lambda(DT E_H) since Lambda E_H = -E_H
        return B.ball_scale(self.lam.apply(state.apply_high_order(), self.ctx), Interval(-1), self.ctx)

    def naive_high_column(self, state: TContext) -> FunctionBall:
        ctx = self.ctx
        EH = self.unit(None)
        inner = B.ball_sub(state.apply_high_order(), EH, ctx)
        return B.ball_sub(EH, self.lam.apply(inner, ctx), ctx)

    def constants(self, enclosure):
        a = B.ball_eval(enclosure, Interval(1), self.ctx)
        return {"a": a, "alpha": self.ctx.inv(a)}


def scheme_fixed_point(G0: FunctionBall, delta_rows, cfg: RenormConfig, candidate=None) -> FixedPointScheme:
    ctx = cfg.ctx
    from .approx import minus_identity

    lam = build_lambda(minus_identity(delta_rows, ctx), Interval(-1), ctx, candidate)
    return FixedPointScheme(G0, lam, cfg)


# ---------------------------------------------------------------------------
# eigen-schemes on a verified fixed-point ball


def _phi(f: FunctionBall, ctx) -> Interval:
    return f.phi(ctx)


class DeltaScheme(QuasiNewtonScheme):
    """``Psi(V) = V - Lambda [DT(G) V - phi(V) V]`` for G in the verified ball."""

    name = "delta"

    def __init__(self, G_ball: FunctionBall, V0: FunctionBall, lam: LinearAction, cfg: RenormConfig):
        super().__init__(V0, lam, cfg.ctx)
        self.cfg = cfg
        self.G_ball = G_ball
        self._tc = None

    @property
    def tcontext(self) -> TContext:
        if self._tc is None:
            self._tc = TContext(self.G_ball, self.cfg)
        return self._tc

    def __getstate__(self):
        d = dict(self.__dict__)
        d["_tc"] = None
        return d

    def residual(self):
        ctx = self.ctx
        V = self.center
        DV = self.tcontext.apply(V)
        return B.ball_sub(DV, B.ball_scale(V, _phi(V, ctx), ctx), ctx)

    def prepare(self, rho):
        V1 = self.inflate(rho)
        return {"V1": V1, "phi": _phi(V1, self.ctx), "tc": self.tcontext}

    def poly_column(self, state, k):
        ctx = self.ctx
        Ek = self.unit(k)
        t = B.ball_sub(state["tc"].apply_basis(k), B.ball_scale(Ek, state["phi"], ctx), ctx)
        if k == 0:
            t = B.ball_sub(t, state["V1"], ctx)
        return B.ball_sub(Ek, self.lam.apply(t, ctx), ctx)

    def _ratio(self, state):
        ctx = self.ctx
        return ctx.sub(Interval(1), ctx.div(state["phi"], _phi(self.center, ctx)))

    def high_column(self, state):
        ctx = self.ctx
        EH = self.unit(None)
        lead = B.ball_scale(EH, self._ratio(state), ctx)
        return B.ball_sub(lead, self.lam.apply(state["tc"].apply_high_order(), ctx), ctx)

    def naive_high_column(self, state):
        ctx = self.ctx
        EH = self.unit(None)
        t = B.ball_sub(state["tc"].apply_high_order(), B.ball_scale(EH, state["phi"], ctx), ctx)
        return B.ball_sub(EH, self.lam.apply(t, ctx), ctx)

    def constants(self, enclosure):
        return {"delta": _phi(enclosure, self.ctx)}


def scheme_delta_eigen(G_ball: FunctionBall, V0: FunctionBall, delta_rows, cfg: RenormConfig, candidate=None) -> DeltaScheme:
    """Lambda is the inverse of ``Delta - V0 e_0^* - V0_0 I`` (``-1/V0_0`` above N)."""
    ctx = cfg.ctx
    n = ctx.near
    v = V0.lo
    v0 = v[0]
    rows = []
    for i, r in enumerate(delta_rows):
        row = list(r)
        row[0] = n.sub(row[0], v[i])
        row[i] = n.sub(row[i], v0)
        rows.append(row)
    high = ctx.neg(ctx.inv(Interval(v0)))
    lam = build_lambda(rows, high, ctx, candidate)
    return DeltaScheme(G_ball, V0, lam, cfg)


class NoiseOperator:
    """``L W = a^-2 W(z) + K^2 W(Q(a)X)`` on balls, from a T context."""

    def __init__(self, tc: TContext):
        ctx = tc.cfg.ctx
        self.tc = tc
        self.ia2 = ctx.pow(tc.inv_a, 2)
        self.K2 = B.ball_mul(tc.K, tc.K, ctx)

    def _combine(self, outer, inner):
        ctx = self.tc.cfg.ctx
        return B.ball_add(B.ball_scale(outer, self.ia2, ctx), B.ball_mul(self.K2, inner, ctx), ctx)

    def apply(self, W: FunctionBall) -> FunctionBall:
        tc, ctx = self.tc, self.tc.cfg.ctx
        outer = B.ball_compose(W, tc.z, ctx, recharted=(tc.w2, tc.theta2))
        inner = B.ball_compose(W, tc.arg, ctx, recharted=(tc.w1, tc.theta1))
        return self._combine(outer, inner)

    def apply_basis(self, k: int) -> FunctionBall:
        p1, p2 = self.tc.basis_powers()
        return self._combine(p2[k], p1[k])

    def apply_high_order(self) -> FunctionBall:
        tc, ctx = self.tc, self.tc.cfg.ctx
        EH = B.ball_high_order_unit(tc.cfg.domain, tc.cfg.N)
        outer = B.ball_compose(EH, tc.z, ctx, recharted=(tc.w2, tc.theta2))
        inner = B.ball_compose(EH, tc.arg, ctx, recharted=(tc.w1, tc.theta1))
        return self._combine(outer, inner)


class NoiseScheme(QuasiNewtonScheme):
    """``Theta(W) = W - Lambda [L W - phi(W)^2 W]``."""

    name = "noise"

    def __init__(self, G_ball: FunctionBall, W0: FunctionBall, lam: LinearAction, cfg: RenormConfig):
        super().__init__(W0, lam, cfg.ctx)
        self.cfg = cfg
        self.G_ball = G_ball
        self._op = None

    @property
    def operator(self) -> NoiseOperator:
        if self._op is None:
            self._op = NoiseOperator(TContext(self.G_ball, self.cfg))
        return self._op

    def __getstate__(self):
        d = dict(self.__dict__)
        d["_op"] = None
        return d

    def residual(self):
        ctx = self.ctx
        W = self.center
        p = _phi(W, ctx)
        return B.ball_sub(self.operator.apply(W), B.ball_scale(W, ctx.mul(p, p), ctx), ctx)

    def prepare(self, rho):
        W1 = self.inflate(rho)
        p = _phi(W1, self.ctx)
        return {"W1": W1, "phi": p, "phi2": self.ctx.pow(p, 2), "op": self.operator}

    def poly_column(self, state, k):
        ctx = self.ctx
        Ek = self.unit(k)
        t = B.ball_sub(state["op"].apply_basis(k), B.ball_scale(Ek, state["phi2"], ctx), ctx)
        if k == 0:
            two_phi = ctx.mul(Interval(2), state["phi"])
            t = B.ball_sub(t, B.ball_scale(state["W1"], two_phi, ctx), ctx)
        return B.ball_sub(Ek, self.lam.apply(t, ctx), ctx)

    def high_column(self, state):
        ctx = self.ctx
        EH = self.unit(None)
        r = ctx.div(state["phi"], _phi(self.center, ctx))
        lead = B.ball_scale(EH, ctx.sub(Interval(1), ctx.pow(r, 2)), ctx)
        return B.ball_sub(lead, self.lam.apply(state["op"].apply_high_order(), ctx), ctx)

    def naive_high_column(self, state):
        ctx = self.ctx
        EH = self.unit(None)
        t = B.ball_sub(state["op"].apply_high_order(), B.ball_scale(EH, state["phi2"], ctx), ctx)
        return B.ball_sub(EH, self.lam.apply(t, ctx), ctx)

    def constants(self, enclosure):
        return {"gamma": _phi(enclosure, self.ctx)}


def scheme_noise(G_ball: FunctionBall, W0: FunctionBall, noise_rows, cfg: RenormConfig, candidate=None) -> NoiseScheme:
    """Lambda is the inverse of ``L_PP - 2 W0_0 W0 e_0^* - W0_0^2 I`` (``-1/W0_0^2`` above N)."""
    ctx = cfg.ctx
    n = ctx.near
    w = W0.lo
    w0 = w[0]
    two_w0 = n.mul(2, w0)
    w0sq = n.mul(w0, w0)
    rows = []
    for i, r in enumerate(noise_rows):
        row = list(r)
        row[0] = n.sub(row[0], n.mul(two_w0, w[i]))
        row[i] = n.sub(row[i], w0sq)
        rows.append(row)
    high = ctx.neg(ctx.inv(ctx.pow(Interval(w0), 2)))
    lam = build_lambda(rows, high, ctx, candidate)
    return NoiseScheme(G_ball, W0, lam, cfg)
