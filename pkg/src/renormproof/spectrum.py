"""Spectral structure of DT(G) on a ball, by a contracted matrix and homotopy.

Coordinates: the polynomial part is changed by a real matrix C (eigenvectors
of the truncated derivative, ordered by modulus); the first m new
coordinates are retained and everything else (remaining coordinates plus
the high-order part) is lumped into one coordinate measured in the norm

    ||u|| = w_rest * sum_{i >= m} |y_i| + w_high * ||h||_1.

The contracted matrix M has the retained block in its top-left corner, the
bounds ``beta_i`` (lump -> mode i), ``gamma_j`` (mode j -> lump) and ``tau``
(lump -> lump) as symmetric rectangles.  If ``L v = lambda v`` then with
``s = ||u||`` and a norming functional f for u, the vector ``(y_0..y_{m-1}, s)``
is annihilated by ``M' - lambda I`` for a member M' of M, so
``0 in det(M - lambda I)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from gmpy2 import mpfr

from . import balls as B
from .balls import FunctionBall
from .interval import ArithContext, Interval, Rectangle, exact_decimal, fabs, get_context, neg
from .linalg import (
    IntervalMatrix,
    RectArray,
    rmul_arr,
    batched_rect_determinant,
    interval_matvec,
    matvec_endpoints,
    rect_determinant,
    to_float_down,
    to_float_up,
    verified_inverse,
)
from .renorm import arc_rectangle, circle_angles

_ZERO = mpfr(0)


@dataclass
class ConjugatedData:
    """``C^-1 DT C`` on P plus the l1 data needed for the lump bounds."""

    n: int
    core: IntervalMatrix  # C^-1 (coeffs of Y_j), without the err widening
    widened: IntervalMatrix  # entries widened for the err budgets
    hi: list  # high-order budget of column j (after C)
    err: list  # general budget of column j
    high_core: list  # C^-1 (coeffs of DT E_H)
    high_widened: list
    high_hi: mpfr
    high_err: mpfr
    cinv: IntervalMatrix
    eigen_estimates: np.ndarray | None = None


def conjugated_enclosure(columns: Sequence[FunctionBall], high: FunctionBall, C: np.ndarray, ctx: ArithContext | None = None) -> ConjugatedData:
    """Enclose ``C^-1 L C`` from ball columns ``L E_k`` and ``L E_H``.

    ``C`` must have float64 (hence exactly representable) entries.
    """
    ctx = ctx or get_context()
    n = len(columns)
    C = np.asarray(C, dtype=float)
    if C.shape != (n, n):
        raise ValueError("C must be square with one row per column ball")
    Cm = IntervalMatrix.from_points([[float(x) for x in r] for r in C], ctx)
    X = np.linalg.inv(C)
    cinv = verified_inverse(Cm, [[float(x) for x in r] for r in X], ctx).matrix
    cmags = cinv.mag_rows()
    row_max = [max(r) for r in cmags]
    u, d = ctx.up, ctx.down
    core_lo, core_hi, wid_lo, wid_hi, his, errs = [], [], [], [], [], []
    for j in range(n):
        Y = None
        for k in range(n):
            c = C[k, j]
            if c == 0:
                continue
            term = B.ball_scale(columns[k], Interval(mpfr(float(c))), ctx)
            Y = term if Y is None else B.ball_add(Y, term, ctx)
        lo, hi = matvec_endpoints(cinv, Y.lo, Y.up, ctx)
        core_lo.append(lo)
        core_hi.append(hi)
        wid_lo.append([d.sub(a, u.mul(rm, Y.err)) for a, rm in zip(lo, row_max)])
        wid_hi.append([u.add(b, u.mul(rm, Y.err)) for b, rm in zip(hi, row_max)])
        his.append(Y.hi)
        errs.append(Y.err)
    tr = lambda cols: [list(r) for r in zip(*cols)]  # columns -> rows
    core = IntervalMatrix(tr(core_lo), tr(core_hi))
    widened = IntervalMatrix(tr(wid_lo), tr(wid_hi))
    hlo, hhi = matvec_endpoints(cinv, high.lo, high.up, ctx)
    high_core = [Interval(a, b) for a, b in zip(hlo, hhi)]
    high_wid = [
        Interval(d.sub(a, u.mul(rm, high.err)), u.add(b, u.mul(rm, high.err))) for a, b, rm in zip(hlo, hhi, row_max)
    ]
    return ConjugatedData(n, core, widened, his, errs, high_core, high_wid, high.hi, high.err, cinv)


@dataclass
class ContractedMatrix:
    m: int
    entries: list  # (m+1) x (m+1) Rectangles
    beta: list
    gamma: list
    tau: float
    weights: tuple

    @property
    def size(self) -> int:
        return self.m + 1

    def midpoint_diagonal(self) -> list[complex]:
        out = []
        for i in range(self.m):
            z = self.entries[i][i]
            out.append(complex(float(z.re.mid()), float(z.im.mid())))
        return out + [0j]


def _sym(r) -> Rectangle:
    return Rectangle(Interval(neg(r), r), Interval(neg(r), r))


def contract_matrix(data: ConjugatedData, m: int, w_rest=1, w_high=1, ctx: ArithContext | None = None) -> ContractedMatrix:
    """Contracted (m+1)x(m+1) rectangle matrix with lump index m."""
    ctx = ctx or get_context()
    n = data.n
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= N+1")
    u = ctx.up
    wr = ctx.convert(w_rest).hi
    wh = ctx.convert(w_high).hi
    wr_lo = ctx.convert(w_rest).lo
    wh_lo = ctx.convert(w_high).lo
    # weighted norm of the rest rows of C^-1, per input coordinate
    cm = data.cinv.mag_rows()
    nu = max((u.mul(wr, u.fsum([cm[i][l] for i in range(m, n)])) for l in range(n)), default=_ZERO)
    err_factor = max(nu, wh)

    def mag(lo, hi):
        return max(fabs(lo), fabs(hi))

    def rest_norm(core_col, hi_b, err_b):
        s = u.fsum([mag(core_col[i].lo, core_col[i].hi) for i in range(m, n)])
        return u.fsum([u.mul(wr, s), u.mul(wh, hi_b), u.mul(err_factor, err_b)])

    cols_core = [data.core.column(j) for j in range(n)]
    R = [rest_norm(cols_core[j], data.hi[j], data.err[j]) for j in range(n)]
    RH = rest_norm(data.high_core, data.high_hi, data.high_err)

    beta = []
    for i in range(m):
        cands = [u.div(data.widened[i, j].mag(), wr_lo) for j in range(m, n)]
        cands.append(u.div(data.high_widened[i].mag(), wh_lo))
        beta.append(max(cands))
    gamma = [R[j] for j in range(m)]
    tau = max([u.div(R[j], wr_lo) for j in range(m, n)] + [u.div(RH, wh_lo)])

    entries = []
    for i in range(m):
        row = [Rectangle(data.widened[i, j], Interval(0)) for j in range(m)]
        row.append(_sym(beta[i]))
        entries.append(row)
    entries.append([_sym(g) for g in gamma] + [_sym(tau)])
    return ContractedMatrix(m, entries, [float(b) for b in beta], [float(g) for g in gamma], float(tau), (float(wr), float(wh)))


def adapted_basis(C: np.ndarray, m: int) -> np.ndarray:
    """Keep the first m eigenvector columns; replace the rest by an orthonormal
    basis of their span.  The eigenvectors of the small modes are nearly
    dependent, and the orthonormal complement keeps ``C^-1`` well conditioned.
    """
    C = np.asarray(C, dtype=float)
    if m >= C.shape[1]:
        return C.copy()
    Q, _ = np.linalg.qr(C[:, m:])
    return np.hstack([C[:, :m], Q])


def choose_weights(data: ConjugatedData, m: int, grid=None, ctx=None) -> tuple[float, float]:
    """Pick (w_rest, w_high) from a grid of powers of ten minimising ``tau``,
    ties broken by the coupling ``max beta * max gamma``."""
    grid = grid or [10.0**k for k in range(-4, 3)]
    best = None
    for wr in grid:
        for wh in grid:
            M = contract_matrix(data, m, wr, wh, ctx)
            score = (M.tau, max(M.beta) * max(M.gamma))
            if best is None or score < best[0]:
                best = (score, wr, wh)
    _, wr, wh = best
    # a common factor leaves tau and beta*gamma alone; balance beta against
    # gamma so the lump row and column are of similar size
    M = contract_matrix(data, m, wr, wh, ctx)
    b, g = max(M.beta), max(M.gamma)
    if b > 0 and g > 0:
        f = 2.0 ** round(0.5 * math.log2(b / g))
        wr, wh = wr * f, wh * f
    return wr, wh


# ---------------------------------------------------------------------------
# circles and homotopy


@dataclass(frozen=True)
class Circle:
    center: float
    radius: float

    def contains(self, z: complex) -> bool:
        return abs(z - self.center) < self.radius

    def to_dict(self):
        return {"center": self.center, "radius": self.radius}


@dataclass
class SpectrumCertificate:
    circles: tuple
    counts: tuple  # covering counts per circle
    mu_pieces: int
    verified: bool
    region_counts: tuple  # eigenvalues of D per circle interior
    m: int
    weights: tuple
    checks: int = 0
    failures: list = field(default_factory=list)
    diagonal: list = field(default_factory=list)
    min_abs_det: list = field(default_factory=list)
    lump: dict = field(default_factory=dict)

    def summary_line(self) -> str:
        return f"spectrum verified={self.verified} m={self.m} coverings={self.counts} checks={self.checks} regions={self.region_counts}"

    def to_dict(self):
        return {
            "version": 1,
            "circles": [c.to_dict() for c in self.circles],
            "counts": list(self.counts),
            "mu_pieces": self.mu_pieces,
            "verified": self.verified,
            "region_counts": list(self.region_counts),
            "m": self.m,
            "weights": list(self.weights),
            "checks": self.checks,
            "failures": self.failures[:20],
            "diagonal": [[z.real, z.imag] for z in self.diagonal],
            "min_abs_det": self.min_abs_det,
            "lump": self.lump,
        }


def structure_of(diagonal: Sequence[complex], circles: Sequence[Circle]) -> tuple:
    """Count diagonal entries inside each circle; every entry must be inside one."""
    counts = [0] * len(circles)
    for z in diagonal:
        inside = [i for i, c in enumerate(circles) if c.contains(z)]
        if len(inside) != 1:
            raise ValueError(f"diagonal entry {z} is not inside exactly one circle")
        counts[inside[0]] += 1
    return tuple(counts)


def check_circles(circles: Sequence[Circle]):
    """Pairwise disjoint closed discs; the last one must lie inside the unit disc.

    Disjointness keeps the complement of the discs connected, which the
    eigenvalue counting relies on.
    """
    for i in range(len(circles)):
        for j in range(i + 1, len(circles)):
            a, b = circles[i], circles[j]
            if abs(a.center - b.center) <= a.radius + b.radius + 1e-12:
                raise ValueError(f"circles {i} and {j} intersect")
    last = circles[-1]
    if abs(last.center) + last.radius >= 1:
        raise ValueError("the last circle must lie inside the unit disc")


def _to_arrays(rects: Sequence[Sequence[Rectangle]]):
    n = len(rects)
    out = [np.empty((n, n)) for _ in range(4)]
    for i, r in enumerate(rects):
        for j, z in enumerate(r):
            out[0][i, j] = to_float_down(z.re.lo)
            out[1][i, j] = to_float_up(z.re.hi)
            out[2][i, j] = to_float_down(z.im.lo)
            out[3][i, j] = to_float_up(z.im.hi)
    return out


def _imul_scalar(lo, hi, ml, mh):
    """[lo, hi] * [ml, mh] with 0 <= ml <= mh, outward."""
    p = [lo * ml, lo * mh, hi * ml, hi * mh]
    return np.nextafter(np.minimum.reduce(p), -np.inf), np.nextafter(np.maximum.reduce(p), np.inf)


def _row_scalings(A: RectArray) -> np.ndarray:
    """Complex points ``1 / mid(A_ii)`` (1 where the midpoint vanishes)."""
    di = np.arange(A.rl.shape[-1])
    mid = ((A.rl[..., di, di] + A.rh[..., di, di]) + 1j * (A.il[..., di, di] + A.ih[..., di, di])) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(mid != 0, 1.0 / mid, 1.0)
    return np.where(np.isfinite(s), s, 1.0)


def _precondition_rows(A: RectArray) -> RectArray:
    """Scale row i by a nonzero complex point so the diagonal is close to 1.

    The determinant is multiplied by a nonzero factor, so excluding 0 is
    unaffected; without the scaling every pivot rotates the rectangles and
    the axis-aligned hulls grow geometrically with the size.
    """
    s = _row_scalings(A)[..., :, None]
    S = RectArray(s.real, s.real, s.imag, s.imag)
    return rmul_arr(S, A)


class HomotopyProblem:
    """``det(D + mu (M - D) - lambda I)`` over batches of (mu, lambda) boxes."""

    def __init__(self, M: ContractedMatrix, ctx: ArithContext | None = None):
        ctx = ctx or get_context()
        self.ctx = ctx
        self.M = M
        n = M.size
        self.n = n
        diag = M.midpoint_diagonal()
        self.diagonal = diag
        Drects = [
            [Rectangle(ctx.convert(diag[i].real), ctx.convert(diag[i].imag)) if i == j else Rectangle(Interval(0)) for j in range(n)]
            for i in range(n)
        ]
        diff = [[ctx.rsub(M.entries[i][j], Drects[i][j]) for j in range(n)] for i in range(n)]
        self.diff = _to_arrays(diff)
        self.D = _to_arrays(Drects)
        # every eigenvalue of every homotopy member obeys |lambda| <= outer
        # (Gershgorin on the contracted matrices)
        u = ctx.up
        self.outer = float(
            max(
                u.fsum([u.add(ctx.rabs_upper(Drects[i][j]), ctx.rabs_upper(diff[i][j])) for j in range(n)])
                for i in range(n)
            )
        )

    def determinants(self, mu: tuple[float, float], lam: Sequence[Rectangle]):
        """Determinant enclosures for one mu interval and a batch of lambda boxes."""
        n = self.n
        Bsz = len(lam)
        ml, mh = mu
        rl, rh = _imul_scalar(self.diff[0], self.diff[1], ml, mh)
        il, ih = _imul_scalar(self.diff[2], self.diff[3], ml, mh)
        rl = np.nextafter(rl + self.D[0], -np.inf)
        rh = np.nextafter(rh + self.D[1], np.inf)
        il = np.nextafter(il + self.D[2], -np.inf)
        ih = np.nextafter(ih + self.D[3], np.inf)
        arr = [np.broadcast_to(x, (Bsz, n, n)).copy() for x in (rl, rh, il, ih)]
        lr_lo = np.array([to_float_down(z.re.lo) for z in lam])
        lr_hi = np.array([to_float_up(z.re.hi) for z in lam])
        li_lo = np.array([to_float_down(z.im.lo) for z in lam])
        li_hi = np.array([to_float_up(z.im.hi) for z in lam])
        di = np.arange(n)
        arr[0][:, di, di] = np.nextafter(arr[0][:, di, di] - lr_hi[:, None], -np.inf)
        arr[1][:, di, di] = np.nextafter(arr[1][:, di, di] - lr_lo[:, None], np.inf)
        arr[2][:, di, di] = np.nextafter(arr[2][:, di, di] - li_hi[:, None], -np.inf)
        arr[3][:, di, di] = np.nextafter(arr[3][:, di, di] - li_lo[:, None], np.inf)
        A = _precondition_rows(RectArray(*arr))
        det, bad = batched_rect_determinant(A)
        excluded = ~det.contains_zero() & ~bad
        return det, excluded

    def rect_matrix(self, mu: tuple[float, float], lam: Rectangle) -> list:
        """The preconditioned matrix in mpfr rectangle arithmetic (cross-checks)."""
        ctx = self.ctx
        n = self.n
        muI = Rectangle(ctx.convert(mu[0], mu[1]))
        rows = []
        for i in range(n):
            d = Rectangle(ctx.convert(self.diagonal[i].real), ctx.convert(self.diagonal[i].imag))
            row = []
            for j in range(n):
                if i == j:
                    e = ctx.rsub(ctx.radd(ctx.rmul(muI, ctx.rsub(self.M.entries[i][j], d)), d), lam)
                else:
                    e = ctx.rmul(muI, self.M.entries[i][j])
                row.append(e)
            rows.append(row)
        # same row scalings as the float path, applied as exact points
        arr = _to_arrays(rows)
        s = _row_scalings(RectArray(*[a[None] for a in arr]))[0]
        return [[ctx.rmul(Rectangle(Interval(mpfr(float(s[i].real))), Interval(mpfr(float(s[i].imag)))), e) for e in r] for i, r in enumerate(rows)]

    def cross_check(self, mu: tuple[float, float], lam: Rectangle) -> bool:
        """Float and mpfr determinant enclosures of the same matrix intersect."""
        det, _ = self.determinants(mu, [lam])
        ref = rect_determinant(self.rect_matrix(mu, lam), self.ctx)
        return bool(
            det.rl[0] <= ref.re.hi and ref.re.lo <= det.rh[0] and det.il[0] <= ref.im.hi and ref.im.lo <= det.ih[0]
        )


def _det_gap(det: RectArray) -> np.ndarray:
    """Lower bound of the distance from 0 along a coordinate axis."""
    re = np.where(det.rl > 0, det.rl, np.where(det.rh < 0, -det.rh, 0.0))
    im = np.where(det.il > 0, det.il, np.where(det.ih < 0, -det.ih, 0.0))
    return np.maximum(re, im)


def homotopy_exclusion(
    M: ContractedMatrix,
    circles: Sequence[Circle],
    counts: Sequence[int],
    mu_pieces: int = 64,
    max_depth: int = 12,
    ctx: ArithContext | None = None,
    cross_checks: int = 3,
) -> SpectrumCertificate:
    """Exclude eigenvalues of every ``L_mu`` from every circle.

    Failing (mu, arc) boxes are bisected in both variables up to
    ``max_depth`` levels; the first unresolved box is reported as a witness.
    """
    ctx = ctx or get_context()
    check_circles(circles)
    if len(counts) != len(circles):
        raise ValueError("one covering count per circle")
    prob = HomotopyProblem(M, ctx)
    regions = structure_of(prob.diagonal, circles)
    checks = 0
    failures = []
    min_dets = []
    samples = []
    for ci, (circ, K) in enumerate(zip(circles, counts)):
        t = circle_angles(K, ctx)
        rect_cache = {}

        def rect(arc):
            r = rect_cache.get(arc)
            if r is None:
                r = rect_cache[arc] = arc_rectangle(circ.center, circ.radius, arc[0], arc[1], ctx)
            return r

        work = [((t[j], t[j + 1]), mu, 0) for mu in _mu_grid(mu_pieces) for j in range(K)]
        min_det = math.inf
        while work and len(failures) <= 50:
            by_mu = {}
            for item in work:
                by_mu.setdefault(item[1], []).append(item)
            work = []
            for mu, items in by_mu.items():
                det, ok = prob.determinants(mu, [rect(it[0]) for it in items])
                checks += len(items)
                gaps = _det_gap(det)
                for it, good, gap in zip(items, ok, gaps):
                    if good:
                        min_det = min(min_det, float(gap))
                        continue
                    (t0, t1), (m0, m1), depth = it
                    if depth >= max_depth:
                        failures.append({"circle": ci, "arc": [float(t0), float(t1)], "mu": [m0, m1]})
                        continue
                    tm = ctx.near.div_2exp(ctx.near.add(t0, t1), 1)
                    mm = (m0 + m1) / 2
                    for arc in ((t0, tm), (tm, t1)):
                        for mu2 in ((m0, mm), (mm, m1)):
                            work.append((arc, mu2, depth + 1))
        min_dets.append(min_det)
        samples.append((((t[0], t[1])), (1 - 1 / mu_pieces, 1.0), rect((t[0], t[1]))))
        if failures:
            break
    agree = all(prob.cross_check(mu, lam) for _, mu, lam in samples[:cross_checks])
    return SpectrumCertificate(
        tuple(circles),
        tuple(counts),
        mu_pieces,
        not failures and agree,
        regions,
        M.m,
        M.weights,
        checks,
        failures,
        prob.diagonal,
        min_dets,
        {"tau": M.tau, "max_beta": max(M.beta), "max_gamma": max(M.gamma), "outer_radius": prob.outer, "cross_check": agree},
    )


def _mu_grid(k: int):
    return [(i / k, (i + 1) / k) for i in range(k)]


def default_circles(diagonal: Sequence[complex], r12: float = 0.3, r3: float = 0.9) -> tuple[Circle, Circle, Circle]:
    """Circles around the two largest diagonal entries plus one inside |z| < 1."""
    big = sorted(diagonal, key=abs, reverse=True)[:2]
    c1, c2 = sorted((z.real for z in big), reverse=True)
    return (Circle(round(c1, 6), r12), Circle(round(c2, 6), r12), Circle(0.0, r3))


def covering_plot_data(circles: Sequence[Circle], counts: Sequence[int], ctx=None) -> list[tuple]:
    """Rectangles of every circle covering: (circle, re_lo, re_hi, im_lo, im_hi)."""
    ctx = ctx or get_context()
    out = []
    for ci, (c, K) in enumerate(zip(circles, counts)):
        t = circle_angles(K, ctx)
        for j in range(K):
            r = arc_rectangle(c.center, c.radius, t[j], t[j + 1], ctx)
            out.append((ci, float(r.re.lo), float(r.re.hi), float(r.im.lo), float(r.im.hi)))
    return out


def certify_spectrum(
    G: FunctionBall,
    delta_rows,
    cfg,
    m: int = 20,
    circles: Sequence[Circle] | None = None,
    counts: Sequence[int] = (16, 16, 1000),
    mu_pieces: int = 64,
    max_depth: int = 12,
    weights: tuple[float, float] | None = None,
) -> SpectrumCertificate:
    """Full pipeline: columns of DT on the ball, coordinate change, contracted
    matrix, homotopy exclusion."""
    from .approx import change_of_basis
    from .renorm import TContext

    ctx = cfg.ctx
    tc = TContext(G, cfg)
    cols = [tc.apply_basis(k) for k in range(cfg.N + 1)]
    high = tc.apply_high_order()
    C, _ = change_of_basis(delta_rows)
    data = conjugated_enclosure(cols, high, adapted_basis(C, m), ctx)
    wr, wh = weights or choose_weights(data, m, ctx=ctx)
    M = contract_matrix(data, m, wr, wh, ctx)
    if circles is None:
        circles = default_circles(M.midpoint_diagonal())
    return homotopy_exclusion(M, circles, counts, mu_pieces, max_depth, ctx)
