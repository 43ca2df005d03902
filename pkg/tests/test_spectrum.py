import cmath

import numpy as np
import pytest

from renormproof import balls as B
from renormproof.approx import change_of_basis
from renormproof.balls import Disc, FunctionBall
from renormproof.interval import ArithContext, Interval, Rectangle, local_context
from renormproof.linalg import InconclusiveDeterminant, rect_determinant
from renormproof.renorm import TContext
from renormproof.spectrum import (
    Circle,
    ContractedMatrix,
    adapted_basis,
    check_circles,
    choose_weights,
    conjugated_enclosure,
    contract_matrix,
    homotopy_exclusion,
)

CTX = ArithContext(96)
UNIT = Disc(0.0, 1.0)


def column_balls(A, width, hi=0.0, err=0.0):
    n = A.shape[0]
    cols = []
    for k in range(n):
        lo = [CTX.convert(float(x - width)).lo for x in A[:, k]]
        up = [CTX.convert(float(x + width)).hi for x in A[:, k]]
        cols.append(FunctionBall(UNIT, lo, up, CTX.convert(hi).hi, CTX.convert(err).hi))
    return cols


def random_operator(rng, n=12):
    # a few clear modes on top of a small random part
    lead = np.diag(np.concatenate([rng.uniform(1.5, 9, 3) * rng.choice([-1, 1], 3), rng.uniform(-0.3, 0.3, n - 3)]))
    Q = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    return Q @ lead @ np.linalg.inv(Q) + 0.01 * rng.standard_normal((n, n))


def det_contains_zero(M: ContractedMatrix, lam: complex) -> bool:
    r = 1e-8
    L = Rectangle(CTX.convert(lam.real - r, lam.real + r), CTX.convert(lam.imag - r, lam.imag + r))
    rows = [[CTX.rsub(e, L) if i == j else e for j, e in enumerate(row)] for i, row in enumerate(M.entries)]
    try:
        return rect_determinant(rows, CTX).contains(0)
    except InconclusiveDeterminant:
        return True


@pytest.mark.parametrize("seed", range(100))
def test_determinant_test_contract(seed):
    """For every sampled member and each of its eigenvalues, det(M - lam I) contains 0."""
    rng = np.random.default_rng(seed)
    A = random_operator(rng)
    width = 1e-6 * (seed % 3)
    budgets = [(0.0, 0.0), (1e-4, 0.0), (0.0, 1e-4)][seed % 3]
    cols = column_balls(A, width, *budgets)
    high = B.ball_zero(UNIT, 11) if seed % 2 else B.ball_inflate(B.ball_zero(UNIT, 11), "1e-3", CTX)
    C, _ = change_of_basis(A.tolist())
    m = 4
    with local_context(CTX):
        data = conjugated_enclosure(cols, high, adapted_basis(C, m), CTX)
        M = contract_matrix(data, m, *choose_weights(data, m, ctx=CTX), ctx=CTX)
    for trial in range(3):
        member = A + width * rng.uniform(-1, 1, A.shape) if trial else A
        for lam in np.linalg.eigvals(member):
            assert det_contains_zero(M, complex(lam)), (seed, lam)
    # and the test is not vacuous: a value far outside the spectrum is excluded
    assert not det_contains_zero(M, complex(100.0))


def synthetic(diag, off=(), tau=0.01):
    """Contracted matrix with the given diagonal, couplings {(i, j): v} and lump tau."""
    m = len(diag)
    off = dict(off)
    entries = []
    for i in range(m):
        row = [Rectangle(CTX.convert(diag[i] if i == j else off.get((i, j), 0.0))) for j in range(m)]
        row.append(Rectangle(CTX.convert(-0.001, 0.001), CTX.convert(-0.001, 0.001)))
        entries.append(row)
    s = Rectangle(CTX.convert(-0.001, 0.001), CTX.convert(-0.001, 0.001))
    entries.append([s] * m + [Rectangle(CTX.convert(-tau, tau), CTX.convert(-tau, tau))])
    return ContractedMatrix(m, entries, [0.001] * m, [0.001] * m, tau, (1.0, 1.0))


CIRCLES = (Circle(8.0, 0.3), Circle(2.5, 0.3), Circle(0.0, 0.9))


def test_diagonal_matrix_verifies():
    M = synthetic([8.0, 2.5, 0.4, -0.3, 0.1])
    with local_context(CTX):
        sc = homotopy_exclusion(M, CIRCLES, (16, 16, 200), mu_pieces=8, ctx=CTX)
    assert sc.verified and sc.region_counts == (1, 1, 4)
    assert not sc.failures and sc.lump["cross_check"]


def test_circle_through_an_eigenvalue_fails_with_witness():
    M = synthetic([8.0, 2.5, 0.2], {(0, 1): 0.5, (1, 0): 0.5})
    lam = min(np.linalg.eigvals(np.array([[8.0, 0.5], [0.5, 2.5]])).real)
    bad = (CIRCLES[0], Circle(2.5, abs(2.5 - lam)), CIRCLES[2])
    with local_context(CTX):
        sc = homotopy_exclusion(M, bad, (16, 16, 200), mu_pieces=8, max_depth=4, ctx=CTX)
        good = homotopy_exclusion(M, CIRCLES, (16, 16, 200), mu_pieces=8, ctx=CTX)
    assert not sc.verified
    w = sc.failures[0]
    assert w["circle"] == 1 and w["mu"][1] == 1.0
    # the witness arc is the one passing through the eigenvalue on the real axis
    assert min(abs(cmath.exp(1j * t) - (-1)) for t in w["arc"]) < 0.5
    assert good.verified


@pytest.mark.parametrize("coupling", [0.0, 0.2, 0.5])
def test_finer_covering_never_breaks_a_pass(coupling):
    M = synthetic([8.0, 2.5, 0.3, -0.2], {(0, 1): coupling, (1, 0): coupling, (2, 3): coupling / 4})
    with local_context(CTX):
        coarse = homotopy_exclusion(M, CIRCLES, (16, 16, 100), mu_pieces=8, ctx=CTX)
        fine = homotopy_exclusion(M, CIRCLES, (32, 32, 200), mu_pieces=16, ctx=CTX)
    assert coarse.verified
    assert fine.verified


def test_circles_must_be_disjoint():
    with pytest.raises(ValueError):
        check_circles((Circle(2.0, 0.6), Circle(2.5, 0.3), Circle(0.0, 0.9)))
    with pytest.raises(ValueError):
        check_circles((Circle(8.0, 0.3), Circle(2.5, 0.3), Circle(0.2, 0.9)))


@pytest.fixture(scope="module")
def real_data(fixed_point, run):
    rc = run.cfg.renorm()
    ctx = rc.ctx
    with local_context(ctx):
        tc = TContext(fixed_point.enclosure, rc)
        cols = [tc.apply_basis(k) for k in range(rc.N + 1)]
        high = tc.apply_high_order()
    C, _ = change_of_basis(run.payload("bootstrap")["delta_rows"])
    return cols, high, C, ctx


def test_lump_bound_shrinks_with_more_modes(real_data):
    cols, high, C, ctx = real_data
    taus = []
    with local_context(ctx):
        for m in (4, 8, 16):
            data = conjugated_enclosure(cols, high, adapted_basis(C, m), ctx)
            M = contract_matrix(data, m, *choose_weights(data, m, ctx=ctx), ctx=ctx)
            taus.append(M.tau)
    assert taus[0] > taus[1] > taus[2]
    assert taus[2] < 0.9


def test_run_spectrum_certificate(run):
    p = run.payload("spectrum")
    c = p["certificate"]
    assert p["verified"] and c["verified"]
    assert c["region_counts"] == [1, 1, c["m"] - 1]
    assert c["counts"] == [16, 16, 1000]
    assert c["lump"]["cross_check"]
    assert all(d > 0 for d in c["min_abs_det"])
