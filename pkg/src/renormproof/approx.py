"""Nonrigorous bootstrap of the fixed point and eigenfunctions.

Everything here runs in round-to-nearest arithmetic at the working
precision.  Nothing produced by this module is trusted: the outputs only
seed the rigorous stages, which verify them independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from gmpy2 import mpfr

from .balls import Disc, FunctionBall, ball_singleton
from .interval import ArithContext, Interval, exact_decimal, fabs, get_context

_ZERO = mpfr(0)


class ApproxError(RuntimeError):
    """A nonrigorous solve failed to converge or degenerated."""


@dataclass(frozen=True)
class ApproxSeries:
    """Truncated chart power series with plain (non-interval) coefficients."""

    coeffs: tuple
    domain: Disc

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def to_ball(self, ctx: ArithContext | None = None) -> FunctionBall:
        return ball_singleton(self.coeffs, self.domain, ctx)

    @classmethod
    def from_ball(cls, ball: FunctionBall, ctx: ArithContext | None = None) -> "ApproxSeries":
        return cls(tuple(ball.midpoint_coeffs(ctx)), ball.domain)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "domain": self.domain.to_dict(),
            "coeffs": [exact_decimal(c) for c in self.coeffs],
        }

    @classmethod
    def from_dict(cls, data, ctx: ArithContext | None = None) -> "ApproxSeries":
        ctx = ctx or get_context()
        return cls(tuple(ctx.point(s) for s in data["coeffs"]), Disc.from_dict(data["domain"]))

    def norm(self) -> float:
        return math.fsum(abs(float(c)) for c in self.coeffs)


# ---------------------------------------------------------------------------
# plain truncated series arithmetic


class SeriesArith:
    """Round-to-nearest truncated series operations at a fixed degree."""

    def __init__(self, N: int, ctx: ArithContext):
        self.N = N
        self.ctx = ctx
        self.near = ctx.near

    def zero(self):
        return [_ZERO] * (self.N + 1)

    def const(self, v):
        out = self.zero()
        out[0] = v
        return out

    def add(self, a, b):
        n = self.near
        return [n.add(x, y) for x, y in zip(a, b)]

    def sub(self, a, b):
        n = self.near
        return [n.sub(x, y) for x, y in zip(a, b)]

    def scale(self, a, s):
        n = self.near
        return [n.mul(x, s) for x in a]

    def mul(self, a, b):
        N = self.N
        ex = self.ctx.exact.mul
        la = _length(a)
        lb = _length(b)
        terms = [[] for _ in range(N + 1)]
        for i in range(min(la, N + 1)):
            ai = a[i]
            if ai == 0:
                continue
            for j in range(min(lb, N + 1 - i)):
                terms[i + j].append(ex(ai, b[j]))
        fs = self.near.fsum
        return [fs(t) if t else _ZERO for t in terms]

    def compose(self, f, w):
        """``sum f_k w**k`` by Horner, w already in f's chart."""
        n = _length(f)
        acc = self.const(f[n - 1])
        for k in range(n - 2, -1, -1):
            acc = self.mul(acc, w)
            acc[0] = self.near.add(acc[0], f[k])
        return acc

    def rechart(self, g, disc: Disc):
        n = self.near
        out = list(g)
        out[0] = n.sub(out[0], disc.center)
        return [n.div(x, disc.radius) for x in out]

    def derivative(self, f, disc: Disc):
        """Coefficients of ``f'`` in the same chart (x-derivative)."""
        n = self.near
        d = [n.div(n.mul(f[k], k), disc.radius) for k in range(1, len(f))]
        return d + [_ZERO]

    def powers(self, w, n):
        out = [self.const(mpfr(1))]
        for _ in range(n):
            out.append(self.mul(out[-1], w))
        return out

    def eval(self, f, t):
        """Evaluate at chart coordinate t."""
        n = self.near
        acc = f[-1]
        for k in range(len(f) - 2, -1, -1):
            acc = n.add(n.mul(acc, t), f[k])
        return acc

    def norm(self, a):
        return self.ctx.up.fsum([fabs(x) for x in a])


def _length(a):
    n = len(a)
    while n > 1 and a[n - 1] == 0:
        n -= 1
    return n


@dataclass
class RenormParts:
    """Shared pieces of T at a plain series (mirrors the rigorous context)."""

    a: mpfr
    inv_a: mpfr
    w1: list
    w2: list
    y1: list
    z: list
    A: list
    TG: list
    K: list | None = None
    Ba: list | None = None


def renorm_parts(G: Sequence, domain: Disc, ctx: ArithContext, d: int = 4, derivative: bool = True) -> RenormParts:
    N = len(G) - 1
    S = SeriesArith(N, ctx)
    n = ctx.near
    t1 = n.div(n.sub(1, domain.center), domain.radius)
    a = S.eval(G, t1)
    inv_a = n.div(1, a)
    qa = n.pow(a, d)
    arg = S.zero()
    arg[0] = n.mul(qa, domain.center)
    arg[1] = n.mul(qa, domain.radius)
    w1 = S.rechart(arg, domain)
    y1 = S.compose(G, w1)
    sq = S.mul(y1, y1)
    z = S.mul(sq, sq) if d == 4 else _spow(S, y1, d)
    w2 = S.rechart(z, domain)
    A = S.compose(G, w2)
    parts = RenormParts(a, inv_a, w1, w2, y1, z, A, S.scale(A, inv_a))
    if derivative:
        dG = S.derivative(G, domain)
        Gp1 = S.compose(dG, w1)
        Gp2 = S.compose(dG, w2)
        Qp1 = S.scale(S.mul(sq, y1) if d == 4 else _spow(S, y1, d - 1), d)
        K = S.scale(S.mul(Gp2, Qp1), inv_a)
        X = S.zero()
        X[0], X[1] = domain.center, domain.radius
        qpa = n.mul(d, n.pow(a, d - 1))
        tail = S.scale(S.mul(S.mul(K, Gp1), X), qpa)
        parts.K = K
        parts.Ba = S.add(S.scale(A, n.minus(n.mul(inv_a, inv_a))), tail)
    return parts


def _spow(S, y, d):
    out = S.const(mpfr(1))
    for _ in range(d):
        out = S.mul(out, y)
    return out


def apply_T_approx(G: ApproxSeries, ctx: ArithContext | None = None, d: int = 4) -> ApproxSeries:
    ctx = ctx or get_context()
    p = renorm_parts(list(G.coeffs), G.domain, ctx, d, derivative=False)
    return ApproxSeries(tuple(p.TG), G.domain)


def derivative_matrix(G: ApproxSeries, ctx: ArithContext | None = None, d: int = 4, parts: RenormParts | None = None):
    """Columns ``DT(G) e_j`` for j = 0..N as a list of columns (mpfr)."""
    ctx = ctx or get_context()
    N = G.degree
    S = SeriesArith(N, ctx)
    n = ctx.near
    p = parts or renorm_parts(list(G.coeffs), G.domain, ctx, d)
    t1 = n.div(n.sub(1, G.domain.center), G.domain.radius)
    P1 = S.powers(p.w1, N)
    P2 = S.powers(p.w2, N)
    cols = []
    for k in range(N + 1):
        col = S.add(S.scale(p.Ba, n.pow(t1, k)), S.scale(P2[k], p.inv_a))
        cols.append(S.add(col, S.mul(p.K, P1[k])))
    return _columns_to_rows(cols)


def noise_matrix(G: ApproxSeries, ctx: ArithContext | None = None, d: int = 4):
    """Truncated matrix of ``W -> a^-2 W(z) + K**2 W(Q(a)X)``."""
    ctx = ctx or get_context()
    N = G.degree
    S = SeriesArith(N, ctx)
    n = ctx.near
    p = renorm_parts(list(G.coeffs), G.domain, ctx, d)
    K2 = S.mul(p.K, p.K)
    ia2 = n.mul(p.inv_a, p.inv_a)
    P1 = S.powers(p.w1, N)
    P2 = S.powers(p.w2, N)
    cols = [S.add(S.scale(P2[k], ia2), S.mul(K2, P1[k])) for k in range(N + 1)]
    return _columns_to_rows(cols)


def _columns_to_rows(cols):
    n = len(cols)
    return [[cols[j][i] for j in range(n)] for i in range(n)]


# ---------------------------------------------------------------------------
# dense linear algebra (mpmath at the working precision)


def _to_mp(x):
    m, e = x.as_mantissa_exp()
    return mpmath.mpf((int(m), int(e)))


def _from_mp(x, ctx):
    sign, man, exp, _ = x._mpf_
    m = -int(man) if sign else int(man)
    return ctx.near.mul_2exp(mpfr(m, max(53, abs(m).bit_length() + 1)), int(exp))


def _mp_matrix(rows):
    return mpmath.matrix([[_to_mp(x) for x in r] for r in rows])


def solve(rows, rhs, ctx: ArithContext | None = None):
    ctx = ctx or get_context()
    with mpmath.workprec(ctx.precision + 16):
        x = mpmath.lu_solve(_mp_matrix(rows), mpmath.matrix([_to_mp(v) for v in rhs]))
        return [_from_mp(x[i], ctx) for i in range(len(rhs))]


def inverse(rows, ctx: ArithContext | None = None):
    ctx = ctx or get_context()
    n = len(rows)
    with mpmath.workprec(ctx.precision + 16):
        try:
            inv = mpmath.inverse(_mp_matrix(rows))
        except ZeroDivisionError as exc:
            raise ApproxError("matrix is numerically singular") from exc
        return [[_from_mp(inv[i, j], ctx) for j in range(n)] for i in range(n)]


def matvec(rows, v, ctx: ArithContext | None = None):
    ctx = ctx or get_context()
    ex = ctx.exact.mul
    return [ctx.near.fsum([ex(a, b) for a, b in zip(r, v)]) for r in rows]


def minus_identity(rows, ctx, shift=1):
    n = ctx.near
    return [[n.sub(x, shift) if i == j else x for j, x in enumerate(r)] for i, r in enumerate(rows)]


def candidate_lambda(delta_rows, ctx: ArithContext | None = None):
    """Working-precision inverse of ``Delta - I``."""
    ctx = ctx or get_context()
    return inverse(minus_identity(delta_rows, ctx), ctx)


# ---------------------------------------------------------------------------
# mu_infinity from superstable orbits


@dataclass
class MuResult:
    mu_inf: mpfr
    mus: list
    ratios: list
    extrapolations: list = field(default_factory=list)


def _orbit(mu, steps, ctx):
    """Return ``(f^steps(0), d/dmu f^steps(0))`` for ``f(x) = 1 - mu x^4``."""
    n = ctx.near
    x = _ZERO
    dx = _ZERO
    mul, sub, add = n.mul, n.sub, n.add
    four_mu = mul(4, mu)
    for _ in range(steps):
        x2 = mul(x, x)
        x3 = mul(x2, x)
        x4 = mul(x2, x2)
        dx = n.minus(add(x4, mul(four_mu, mul(x3, dx))))
        x = sub(1, mul(mu, x4))
    return x, dx


def superstable_parameter(k: int, guess, ctx: ArithContext, bracket=None, max_iter: int = 60):
    """Solve ``f_mu^(2^k)(0) = 0`` near ``guess`` by Newton's method."""
    mu = ctx.point(guess)
    steps = 2**k
    tol = ctx.near.mul_2exp(mpfr(1), -ctx.precision + 8)
    for _ in range(max_iter):
        F, dF = _orbit(mu, steps, ctx)
        if dF == 0:
            raise ApproxError(f"zero derivative at k={k}, mu={mu}")
        step = ctx.near.div(F, dF)
        mu = ctx.near.sub(mu, step)
        if bracket is not None and not (bracket[0] < mu < bracket[1]):
            raise ApproxError(f"Newton left the bracket at k={k}: last bracket {bracket}")
        if ctx.near.abs(step) <= ctx.near.mul(tol, ctx.near.abs(mu)):
            return mu
    raise ApproxError(f"superstable solve did not converge at k={k}; last bracket {bracket}")


def find_mu_infinity(k_max: int = 20, precision: int = 96, delta_guess: float = 7.28) -> MuResult:
    """Accumulation point of superstable parameters, by Aitken extrapolation.

    ``mu_1 = 1`` (the 2-cycle through 0 and 1); ``mu_k`` for later k is
    started from the geometric prediction so Newton avoids ``mu_(k-1)``.
    """
    if k_max < 4:
        raise ValueError("k_max must be at least 4")
    ctx = ArithContext(precision)
    n = ctx.near
    mus = [mpfr(1)]
    # period 4: beyond mu_1 by roughly (mu_inf - 1)(1 - 1/delta)
    g = 1 + 0.595 * (1 - 1 / delta_guess)
    mus.append(superstable_parameter(2, g, ctx, bracket=(mus[0], mpfr(2))))
    ratios = []
    ext = []
    dest = delta_guess
    for k in range(3, k_max + 1):
        gap = n.sub(mus[-1], mus[-2])
        guess = n.add(mus[-1], n.div(gap, dest))
        hi = n.add(mus[-1], gap)
        mus.append(superstable_parameter(k, guess, ctx, bracket=(mus[-1], hi)))
        r = n.div(n.sub(mus[-2], mus[-3]), n.sub(mus[-1], mus[-2]))
        ratios.append(r)
        dest = float(r)
        den = n.add(n.sub(mus[-1], n.mul(2, mus[-2])), mus[-3])
        ext.append(n.sub(mus[-1], n.div(n.mul(n.sub(mus[-1], mus[-2]), n.sub(mus[-1], mus[-2])), den)))
    return MuResult(ext[-1], mus, ratios, ext)


# ---------------------------------------------------------------------------
# fixed point


def initial_series(mu, domain: Disc, N: int, ctx: ArithContext | None = None) -> ApproxSeries:
    """``G(X) = 1 - mu X`` in the chart of ``domain``."""
    ctx = ctx or get_context()
    n = ctx.near
    mu = ctx.point(mu) if not isinstance(mu, type(_ZERO)) else n.plus(mu)
    c = [_ZERO] * (N + 1)
    c[0] = n.sub(1, n.mul(mu, domain.center))
    c[1] = n.minus(n.mul(mu, domain.radius))
    return ApproxSeries(tuple(c), domain)


def residual(G: ApproxSeries, TG: ApproxSeries, ctx: ArithContext | None = None) -> float:
    n = (ctx or get_context()).near
    return math.fsum(abs(float(n.sub(a, b))) for a, b in zip(G.coeffs, TG.coeffs))


@dataclass
class BootstrapResult:
    G: ApproxSeries
    residuals: list


def bootstrap_G0(mu, domain: Disc, N: int, iterations: int = 50, ctx: ArithContext | None = None, d: int = 4) -> BootstrapResult:
    """Iterate T from ``1 - mu X`` until the residual stops improving."""
    ctx = ctx or get_context()
    G = initial_series(mu, domain, N, ctx)
    best, best_r = G, math.inf
    res = []
    worse = 0
    for _ in range(iterations):
        TG = apply_T_approx(G, ctx, d)
        r = residual(G, TG, ctx)
        res.append(r)
        if not math.isfinite(r):
            raise ApproxError("operator iteration diverged")
        if r < best_r:
            best, best_r, worse = G, r, 0
        else:
            worse += 1
            if worse >= 1:
                break
        G = TG
    if len(res) >= 6 and all(res[i + 1] > res[i] for i in range(5)):
        raise ApproxError("residual grew for 5 consecutive steps")
    return BootstrapResult(best, res)


@dataclass
class NewtonResult:
    G: ApproxSeries
    residuals: list
    delta: list | None = None


def newton_refine(G: ApproxSeries, ctx: ArithContext | None = None, max_iter: int = 30, d: int = 4) -> NewtonResult:
    """``G <- G - [DT(G) - I]^-1 (T(G) - G)`` on truncated series.

    Stops when the residual falls below ``2**(8 - precision)`` or when two
    successive residuals differ by less than a factor two.
    """
    ctx = ctx or get_context()
    tol = 2.0 ** (8 - ctx.precision)
    res = []
    for _ in range(max_iter):
        p = renorm_parts(list(G.coeffs), G.domain, ctx, d)
        F = [ctx.near.sub(x, y) for x, y in zip(p.TG, G.coeffs)]
        r = math.fsum(abs(float(x)) for x in F)
        res.append(r)
        if r < tol or (len(res) >= 2 and res[-1] > res[-2] / 2):
            break
        D = derivative_matrix(G, ctx, d, parts=p)
        try:
            step = solve(minus_identity(D, ctx), F, ctx)
        except ZeroDivisionError as exc:
            raise ApproxError("DT(G) - I is singular at working precision") from exc
        G = ApproxSeries(tuple(ctx.near.sub(x, s) for x, s in zip(G.coeffs, step)), G.domain)
    return NewtonResult(G, res)


# ---------------------------------------------------------------------------
# eigenvectors


@dataclass
class EigenResult:
    vector: ApproxSeries
    eigenvalue: mpfr  # phi(V) for delta, phi(W)**2 = gamma**2 for noise
    residuals: list
    leading_index: int


def _float_rows(rows):
    return np.array([[float(x) for x in r] for r in rows])


def _eigen_newton(M, v, lam_of, jac_extra, ctx, max_iter=40):
    """Newton on ``M v - lam(v0) v = 0`` with the algebra given by callables."""
    n = ctx.near
    size = len(v)
    tol = 2.0 ** (8 - ctx.precision)
    res = []
    for _ in range(max_iter):
        lam = lam_of(v[0])
        Mv = matvec(M, v, ctx)
        F = [n.sub(Mv[i], n.mul(lam, v[i])) for i in range(size)]
        r = math.fsum(abs(float(x)) for x in F)
        res.append(r)
        if r < tol * max(1.0, abs(float(lam))) or (len(res) >= 2 and res[-1] > res[-2] / 2):
            break
        J = [[n.sub(M[i][j], lam) if i == j else M[i][j] for j in range(size)] for i in range(size)]
        dl = jac_extra(v[0])
        for i in range(size):
            J[i][0] = n.sub(J[i][0], n.mul(dl, v[i]))
        step = solve(J, F, ctx)
        v = [n.sub(a, b) for a, b in zip(v, step)]
    return v, res


def _pick_eigenvector(M, target):
    A = _float_rows(M)
    w, V = np.linalg.eig(A)
    i = int(np.argmin(np.abs(w - target)))
    if abs(w[i].imag) > 1e-8 * abs(w[i]):
        raise ApproxError("selected eigenvalue is not real")
    others = np.delete(w, i)
    if others.size and np.min(np.abs(others - w[i])) < 1e-6 * abs(w[i]):
        raise ApproxError("clustered eigenvalues at the target")
    vec = V[:, i].real
    lead = int(np.argmax(np.abs(vec) > 1e-8 * np.max(np.abs(vec))))
    return w[i].real, vec, lead


def approx_delta_eigen(delta_rows, domain: Disc, ctx: ArithContext | None = None, target: float | None = None, a_value=None) -> EigenResult:
    """Eigenvector of Delta for delta, normalised so ``V_0 = phi(V) = delta``.

    The target eigenvalue defaults to the expanding eigenvalue that is not
    ``a**-d`` (the latter comes from the rescaling symmetry).
    """
    ctx = ctx or get_context()
    if target is None:
        w = np.linalg.eigvals(_float_rows(delta_rows))
        real = sorted((x.real for x in w if abs(x.imag) < 1e-9 and abs(x.real) > 1), key=abs, reverse=True)
        if a_value is not None:
            trivial = float(a_value) ** -4
            real = sorted(real, key=lambda x: -abs(x - trivial))
        if not real:
            raise ApproxError("no expanding real eigenvalue found")
        target = real[0]
    lam, vec, lead = _pick_eigenvector(delta_rows, target)
    if lead != 0:
        raise ApproxError(f"first nonzero eigenvector coefficient has index {lead}, expected 0")
    n = ctx.near
    v = [ctx.point(float(x) * lam / vec[0]) for x in vec]
    v, res = _eigen_newton(delta_rows, v, lambda v0: v0, lambda v0: mpfr(1), ctx)
    return EigenResult(ApproxSeries(tuple(v), domain), v[0], res, lead)


def approx_noise_eigen(noise_rows, domain: Disc, ctx: ArithContext | None = None) -> EigenResult:
    """Dominant eigenvector of the noise matrix with ``W_0 = +gamma``."""
    ctx = ctx or get_context()
    w = np.linalg.eigvals(_float_rows(noise_rows))
    target = max(w, key=abs)
    if abs(target.imag) > 1e-9 or target.real <= 0:
        raise ApproxError("dominant noise eigenvalue is not real positive")
    lam, vec, lead = _pick_eigenvector(noise_rows, target.real)
    if lead != 0:
        raise ApproxError(f"first nonzero eigenvector coefficient has index {lead}, expected 0")
    n = ctx.near
    g = math.sqrt(lam)
    v = [ctx.point(float(x) * g / vec[0]) for x in vec]
    v, res = _eigen_newton(
        noise_rows,
        v,
        lambda v0: n.mul(v0, v0),
        lambda v0: n.mul(2, v0),
        ctx,
    )
    return EigenResult(ApproxSeries(tuple(v), domain), n.mul(v[0], v[0]), res, lead)


def change_of_basis(delta_rows) -> tuple[np.ndarray, np.ndarray]:
    """Real eigenvector matrix C (real/imaginary columns for complex pairs).

    Returns ``(C, eigenvalues)`` with columns ordered by decreasing modulus.
    """
    A = _float_rows(delta_rows)
    w, V = np.linalg.eig(A)
    order = np.argsort(-np.abs(w), kind="stable")
    w, V = w[order], V[:, order]
    cols = []
    vals = []
    i = 0
    while i < len(w):
        if abs(w[i].imag) > 1e-12 * max(1.0, abs(w[i])):
            cols.append(V[:, i].real)
            cols.append(V[:, i].imag)
            vals.extend([w[i], np.conj(w[i])])
            i += 2
        else:
            cols.append(V[:, i].real)
            vals.append(w[i].real)
            i += 1
    C = np.array(cols).T
    C = C / np.max(np.abs(C), axis=0)
    return C, np.array(vals)
