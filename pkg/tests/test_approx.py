import mpmath
import numpy as np
import pytest

from renormproof import approx as A
from renormproof.interval import ArithContext


def oracle_superstable(k, guess, prec=200):
    """Independent solve of f^(2^k)(0) = 0 for f(x) = 1 - mu x^4."""
    with mpmath.workprec(prec):
        def F(mu):
            x = mpmath.mpf(0)
            for _ in range(2**k):
                x = 1 - mu * x**4
            return x

        return mpmath.findroot(F, mpmath.mpf(guess), tol=mpmath.mpf(2) ** (20 - prec))


def test_superstable_parameters_match_oracle():
    res = A.find_mu_infinity(8, 96)
    assert res.mus[0] == 1
    for k in (2, 3, 4):
        with mpmath.workprec(200):
            mu = oracle_superstable(k, float(res.mus[k - 1]))
            assert abs(mpmath.mpf(str(res.mus[k - 1])) - mu) < mpmath.mpf("1e-25")


def test_superstable_sequence_is_increasing_and_ratios_settle():
    res = A.find_mu_infinity(12, 96)
    assert all(a < b for a, b in zip(res.mus, res.mus[1:]))
    assert abs(float(res.ratios[-1]) - float(res.ratios[-2])) < 1e-3


def test_newton_reaches_working_precision(run):
    boot = run.payload("bootstrap")
    assert boot["newton_residuals"][-1] < 2.0 ** (16 - run.cfg.bits)
    assert boot["iteration_residuals"][-1] < boot["iteration_residuals"][0]


def test_eigenvector_estimates(run):
    ctx = run.cfg.ctx
    boot = run.payload("bootstrap")
    rows = [[float(x) for x in r] for r in boot["delta_rows"]]
    V = np.array([float(x) for x in boot["V0"]])
    lam = float(boot["delta_estimate"])
    assert np.linalg.norm(np.array(rows) @ V - lam * V, 1) < 1e-10 * lam
    assert V[0] == pytest.approx(lam)
    W = np.array([float(x) for x in boot["W0"]])
    noise = np.array([[float(x) for x in r] for r in boot["noise_rows"]])
    g2 = float(boot["gamma_sq_estimate"])
    assert np.linalg.norm(noise @ W - g2 * W, 1) < 1e-10 * g2
    assert W[0] ** 2 == pytest.approx(g2)
    del ctx


def test_change_of_basis_diagonalises(run):
    rows = run.payload("bootstrap")["delta_rows"]
    C, w = A.change_of_basis(rows)
    M = np.array([[float(x) for x in r] for r in rows])
    D = np.linalg.solve(C, M @ C)
    # real eigenvalues sit on the diagonal, complex pairs in 2x2 blocks
    assert abs(D[0, 0] - w[0].real) < 1e-8 * abs(w[0])
    assert np.max(np.abs(np.abs(np.linalg.eigvals(D[:6, :6])))) == pytest.approx(abs(w[0]), rel=1e-8)


def test_initial_series_is_the_quartic_family():
    ctx = ArithContext(96)
    from renormproof.balls import Disc

    G = A.initial_series("1.5", Disc(0.5, 0.5), 5, ctx)
    # 1 - 1.5 X at X = c + r t: constant 1 - 0.75, slope -0.75
    assert float(G.coeffs[0]) == pytest.approx(0.25)
    assert float(G.coeffs[1]) == pytest.approx(-0.75)
    assert all(c == 0 for c in G.coeffs[2:])


def test_kmax_guard():
    with pytest.raises(ValueError):
        A.find_mu_infinity(3)
