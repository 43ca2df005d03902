"""Verified dense linear algebra over intervals and rectangles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import gmpy2
import numpy as np
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
    mul_endpoints,
)

_ZERO = mpfr(0)
_ONE = mpfr(1)


class EnclosureError(IntervalError):
    """The residual bound needed for an inverse enclosure is not below 1."""


class InconclusiveDeterminant(IntervalError):
    """A pivot enclosure contains zero; subdivide or raise precision."""


class IntervalMatrix:
    """Dense matrix of real intervals, stored as endpoint rows."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Sequence[Sequence], hi: Sequence[Sequence] | None = None):
        lo = [tuple(r) for r in lo]
        hi = lo if hi is None else [tuple(r) for r in hi]
        if len(lo) != len(hi) or any(len(a) != len(b) for a, b in zip(lo, hi)):
            raise ValueError("endpoint shapes differ")
        if lo and any(len(r) != len(lo[0]) for r in lo):
            raise ValueError("ragged matrix")
        for ra, rb in zip(lo, hi):
            for a, b in zip(ra, rb):
                if not a <= b:
                    raise ValueError("lower endpoint exceeds upper endpoint")
        object.__setattr__(self, "lo", tuple(lo))
        object.__setattr__(self, "hi", tuple(hi))

    def __setattr__(self, name, value):
        raise AttributeError("IntervalMatrix is immutable")

    def __reduce__(self):
        return (IntervalMatrix, (self.lo, self.hi))

    @classmethod
    def from_points(cls, rows, ctx: ArithContext | None = None) -> "IntervalMatrix":
        """Exact when the entries are representable, else outward rounded."""
        ctx = ctx or get_context()
        lo, hi = [], []
        for r in rows:
            ivs = [ctx.convert(x) for x in r]
            lo.append([v.lo for v in ivs])
            hi.append([v.hi for v in ivs])
        return cls(lo, hi)

    @classmethod
    def from_intervals(cls, rows) -> "IntervalMatrix":
        return cls([[v.lo for v in r] for r in rows], [[v.hi for v in r] for r in rows])

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.lo), len(self.lo[0]) if self.lo else 0)

    def __getitem__(self, ij) -> Interval:
        i, j = ij
        return Interval(self.lo[i][j], self.hi[i][j])

    def column(self, j: int) -> list[Interval]:
        return [Interval(self.lo[i][j], self.hi[i][j]) for i in range(self.shape[0])]

    def midpoint(self) -> np.ndarray:
        return np.array([[float((a + b) / 2) for a, b in zip(ra, rb)] for ra, rb in zip(self.lo, self.hi)])

    def is_point(self) -> bool:
        return self.lo is self.hi or self.lo == self.hi

    def mag_rows(self):
        return [[max(fabs(a), fabs(b)) for a, b in zip(ra, rb)] for ra, rb in zip(self.lo, self.hi)]

    def col_norm_upper(self, ctx: ArithContext | None = None) -> mpfr:
        """Upper bound on the l1 operator norm (max column sum)."""
        ctx = ctx or get_context()
        mags = self.mag_rows()
        n, m = self.shape
        return max(ctx.up.fsum([mags[i][j] for i in range(n)]) for j in range(m))

    def row_norm_upper(self, ctx: ArithContext | None = None) -> mpfr:
        """Upper bound on the l-infinity operator norm (max row sum)."""
        ctx = ctx or get_context()
        return max(ctx.up.fsum(r) for r in self.mag_rows())

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "lo": [[exact_decimal(x) for x in r] for r in self.lo],
            "hi": [[exact_decimal(x) for x in r] for r in self.hi],
        }

    @classmethod
    def from_dict(cls, data, ctx: ArithContext | None = None) -> "IntervalMatrix":
        ctx = ctx or get_context()
        lo = [[ctx.convert(s).lo for s in r] for r in data["lo"]]
        hi = [[ctx.convert(s).hi for s in r] for r in data["hi"]]
        return cls(lo, hi)


def identity(n: int) -> IntervalMatrix:
    return IntervalMatrix([[_ONE if i == j else _ZERO for j in range(n)] for i in range(n)])


def _dot(ctx, alo, ahi, blo, bhi):
    """Directed enclosure of ``sum a_k b_k`` from exact endpoint products."""
    ex = ctx.exact
    los, his = [], []
    for p, q, x, y in zip(alo, ahi, blo, bhi):
        if p == 0 and q == 0:
            continue
        if x == 0 and y == 0:
            continue
        l, h = mul_endpoints(ex, ex, p, q, x, y)
        los.append(l)
        his.append(h)
    if not los:
        return _ZERO, _ZERO
    return ctx.down.fsum(los), ctx.up.fsum(his)


def interval_matvec(A: IntervalMatrix, v: Sequence[Interval], ctx: ArithContext | None = None) -> list[Interval]:
    ctx = ctx or get_context()
    n, m = A.shape
    if len(v) != m:
        raise ValueError("dimension mismatch")
    vlo = [x.lo for x in v]
    vhi = [x.hi for x in v]
    return [Interval(*_dot(ctx, A.lo[i], A.hi[i], vlo, vhi)) for i in range(n)]


def matvec_endpoints(A: IntervalMatrix, vlo, vhi, ctx: ArithContext | None = None):
    """As :func:`interval_matvec` on endpoint lists, returning endpoint lists."""
    ctx = ctx or get_context()
    lo, hi = [], []
    for i in range(A.shape[0]):
        a, b = _dot(ctx, A.lo[i], A.hi[i], vlo, vhi)
        lo.append(a)
        hi.append(b)
    return lo, hi


def interval_matmul(A: IntervalMatrix, B: IntervalMatrix, ctx: ArithContext | None = None) -> IntervalMatrix:
    ctx = ctx or get_context()
    n, k = A.shape
    k2, m = B.shape
    if k != k2:
        raise ValueError("dimension mismatch")
    cols_lo = [[B.lo[r][j] for r in range(k)] for j in range(m)]
    cols_hi = [[B.hi[r][j] for r in range(k)] for j in range(m)]
    lo, hi = [], []
    for i in range(n):
        rl, rh = [], []
        for j in range(m):
            a, b = _dot(ctx, A.lo[i], A.hi[i], cols_lo[j], cols_hi[j])
            rl.append(a)
            rh.append(b)
        lo.append(rl)
        hi.append(rh)
    return IntervalMatrix(lo, hi)


@dataclass(frozen=True)
class VerifiedInverse:
    matrix: IntervalMatrix
    beta: float  # upper bound of ||I - X A||_inf


def verified_inverse(A: IntervalMatrix, X, ctx: ArithContext | None = None) -> VerifiedInverse:
    """Enclose ``A'^-1`` for every member ``A'`` of ``A``.

    With ``R = I - X A`` (interval) and ``beta = ||R||_inf < 1``, every member
    is invertible and ``A'^-1 = X + R (I - R)^-1 X``; row i of the correction
    is bounded entrywise by ``r_i ||X||_inf / (1 - beta)`` where ``r_i`` is the
    i-th absolute row sum of R.
    """
    ctx = ctx or get_context()
    if not isinstance(X, IntervalMatrix):
        X = IntervalMatrix.from_points(X, ctx)
    n, m = A.shape
    if n != m or X.shape != (n, n):
        raise ValueError("square matrices of equal size are required")
    XA = interval_matmul(X, A, ctx)
    d, u = ctx.down, ctx.up
    r_rows = []
    for i in range(n):
        mags = []
        for j in range(n):
            lo, hi = XA.lo[i][j], XA.hi[i][j]
            if i == j:
                lo, hi = d.sub(_ONE, hi), u.sub(_ONE, lo)
            else:
                lo, hi = neg(hi), neg(lo)
            mags.append(max(fabs(lo), fabs(hi)))
        r_rows.append(u.fsum(mags))
    beta = max(r_rows)
    if not beta < 1:
        raise EnclosureError(f"residual norm bound {float(beta):.3g} is not below 1")
    xn = X.row_norm_upper(ctx)
    scale = u.div(xn, d.sub(_ONE, beta))
    lo, hi = [], []
    for i in range(n):
        rad = u.mul(r_rows[i], scale)
        lo.append([d.sub(x, rad) for x in X.lo[i]])
        hi.append([u.add(x, rad) for x in X.hi[i]])
    return VerifiedInverse(IntervalMatrix(lo, hi), float(beta))


# ---------------------------------------------------------------------------
# rectangle determinants


RectangleMatrix = list  # list of lists of Rectangle


def rect_determinant(A: Sequence[Sequence[Rectangle]], ctx: ArithContext | None = None) -> Rectangle:
    """Gaussian elimination with partial pivoting on midpoint magnitude."""
    ctx = ctx or get_context()
    n = len(A)
    if any(len(r) != n for r in A):
        raise ValueError("determinant needs a square matrix")
    M = [list(r) for r in A]
    det = Rectangle(Interval(1), Interval(0))
    sign = 1
    for k in range(n):
        def mid_mag(z):
            return abs(complex(float(z.re.mid()), float(z.im.mid())))

        p = max(range(k, n), key=lambda i: mid_mag(M[i][k]))
        if p != k:
            M[k], M[p] = M[p], M[k]
            sign = -sign
        piv = M[k][k]
        if piv.contains(0):
            raise InconclusiveDeterminant(f"pivot {k} contains zero")
        det = ctx.rmul(det, piv)
        for i in range(k + 1, n):
            if _is_zero_rect(M[i][k]):
                continue
            f = ctx.rdiv(M[i][k], piv)
            for j in range(k + 1, n):
                M[i][j] = ctx.rsub(M[i][j], ctx.rmul(f, M[k][j]))
    if sign < 0:
        det = Rectangle(ctx.neg(det.re), ctx.neg(det.im))
    return det


def _is_zero_rect(z: Rectangle) -> bool:
    return z.re.lo == 0 and z.re.hi == 0 and z.im.lo == 0 and z.im.hi == 0


# ---------------------------------------------------------------------------
# batched float64 rectangle arithmetic with one-ulp outward widening


_NEG = -np.inf
_POS = np.inf


def _down(x):
    return np.nextafter(x, _NEG)


def _up(x):
    return np.nextafter(x, _POS)


class RectArray:
    """Arrays of rectangles ``[rl, rh] + i[il, ih]`` in float64.

    Every operation computes round-to-nearest results and widens each
    endpoint by one ulp, which encloses the exact result.
    """

    __slots__ = ("rl", "rh", "il", "ih")

    def __init__(self, rl, rh, il, ih):
        self.rl, self.rh, self.il, self.ih = rl, rh, il, ih

    def __getitem__(self, idx):
        return RectArray(self.rl[idx], self.rh[idx], self.il[idx], self.ih[idx])

    def __setitem__(self, idx, v):
        self.rl[idx], self.rh[idx], self.il[idx], self.ih[idx] = v.rl, v.rh, v.il, v.ih

    def copy(self):
        return RectArray(self.rl.copy(), self.rh.copy(), self.il.copy(), self.ih.copy())

    def contains_zero(self):
        return (self.rl <= 0) & (self.rh >= 0) & (self.il <= 0) & (self.ih >= 0)

    def finite(self):
        return np.isfinite(self.rl) & np.isfinite(self.rh) & np.isfinite(self.il) & np.isfinite(self.ih)


def _iadd(al, ah, bl, bh):
    return _down(al + bl), _up(ah + bh)


def _isub(al, ah, bl, bh):
    return _down(al - bh), _up(ah - bl)


def _imul(al, ah, bl, bh):
    p1, p2, p3, p4 = al * bl, al * bh, ah * bl, ah * bh
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
    return _down(lo), _up(hi)


def _isq(al, ah):
    lo2, hi2 = al * al, ah * ah
    lo = np.where((al <= 0) & (ah >= 0), 0.0, np.minimum(lo2, hi2))
    return _down(lo) * (lo > 0), _up(np.maximum(lo2, hi2))


def rmul_arr(a: RectArray, b: RectArray) -> RectArray:
    rr = _imul(a.rl, a.rh, b.rl, b.rh)
    ii = _imul(a.il, a.ih, b.il, b.ih)
    ri = _imul(a.rl, a.rh, b.il, b.ih)
    ir = _imul(a.il, a.ih, b.rl, b.rh)
    re = _isub(*rr, *ii)
    im = _iadd(*ri, *ir)
    return RectArray(re[0], re[1], im[0], im[1])


def rsub_arr(a: RectArray, b: RectArray) -> RectArray:
    re = _isub(a.rl, a.rh, b.rl, b.rh)
    im = _isub(a.il, a.ih, b.il, b.ih)
    return RectArray(re[0], re[1], im[0], im[1])


def rinv_arr(b: RectArray) -> RectArray:
    """``1/b = conj(b)/|b|^2``; caller guarantees b excludes 0."""
    s1 = _isq(b.rl, b.rh)
    s2 = _isq(b.il, b.ih)
    nl, nh = _iadd(*s1, *s2)
    # reciprocal of the positive interval [nl, nh]
    with np.errstate(divide="ignore"):
        ql, qh = _down(1.0 / nh), _up(1.0 / nl)
    re = _imul(b.rl, b.rh, ql, qh)
    im = _imul(-b.ih, -b.il, ql, qh)
    return RectArray(re[0], re[1], im[0], im[1])


def batched_rect_determinant(A: RectArray) -> tuple[RectArray, np.ndarray]:
    """Determinants of a batch of rectangle matrices (shape ``(B, n, n)``).

    Returns the determinant enclosures and a boolean mask of batch entries
    whose elimination was inconclusive (a pivot contained zero).
    """
    A = A.copy()
    Bsz, n, _ = A.rl.shape
    idx = np.arange(Bsz)
    det = RectArray(np.ones(Bsz), np.ones(Bsz), np.zeros(Bsz), np.zeros(Bsz))
    bad = np.zeros(Bsz, dtype=bool)
    for k in range(n):
        col = A[:, k:, k]
        mag = np.hypot((col.rl + col.rh) / 2, (col.il + col.ih) / 2)
        p = k + np.argmax(mag, axis=1)
        swap = p != k
        if np.any(swap):
            for arr in (A.rl, A.rh, A.il, A.ih):
                rows_p = arr[idx, p].copy()
                arr[idx, p] = arr[idx, k]
                arr[idx, k] = rows_p
            det = RectArray(
                np.where(swap, -det.rh, det.rl),
                np.where(swap, -det.rl, det.rh),
                np.where(swap, -det.ih, det.il),
                np.where(swap, -det.il, det.ih),
            )
        piv = A[:, k, k]
        zero = piv.contains_zero() | ~piv.finite()
        bad |= zero
        # neutralise degenerate pivots so the arithmetic stays finite
        safe = RectArray(
            np.where(zero, 1.0, piv.rl), np.where(zero, 1.0, piv.rh), np.where(zero, 0.0, piv.il), np.where(zero, 0.0, piv.ih)
        )
        det = rmul_arr(det, safe)
        if k + 1 < n:
            inv = rinv_arr(safe)
            f = rmul_arr(A[:, k + 1 :, k], inv[:, None])
            upd = rmul_arr(f[:, :, None], A[:, k, None, k + 1 :])
            A[:, k + 1 :, k + 1 :] = rsub_arr(A[:, k + 1 :, k + 1 :], upd)
    bad |= ~det.finite()
    return det, bad


def rect_matrix_to_arrays(rows: Sequence[Sequence[Rectangle]]) -> RectArray:
    """Outward conversion of an mpfr rectangle matrix to float64 arrays."""
    n = len(rows)
    out = [np.empty((n, n)) for _ in range(4)]
    for i, r in enumerate(rows):
        for j, z in enumerate(r):
            out[0][i, j] = to_float_down(z.re.lo)
            out[1][i, j] = to_float_up(z.re.hi)
            out[2][i, j] = to_float_down(z.im.lo)
            out[3][i, j] = to_float_up(z.im.hi)
    return RectArray(*out)


_D53 = gmpy2.context(precision=53, round=gmpy2.RoundDown)
_U53 = gmpy2.context(precision=53, round=gmpy2.RoundUp)


def to_float_down(x) -> float:
    return float(_D53.plus(x))


def to_float_up(x) -> float:
    return float(_U53.plus(x))
