from pathlib import Path

import pytest

from renormproof.extension import ExtendedEvaluator, ExtensionError, emit_plot_data
from renormproof.interval import Interval, local_context


@pytest.fixture(scope="module")
def ev(run, fixed_point, delta_cert, noise_cert):
    ctx = run.cfg.ctx
    return ExtendedEvaluator(
        fixed_point.refined,
        4,
        V=delta_cert.refined,
        delta=delta_cert.constants["delta"],
        W=noise_cert.refined,
        gamma=noise_cert.constants["gamma"],
        ctx=ctx,
    )


def iv(ev, lo, hi=None):
    return ev.ctx.convert(lo, hi) if hi is not None else ev.ctx.convert(lo)


def test_anchor_values(ev, fixed_point, delta_cert, noise_cert):
    with local_context(ev.ctx):
        assert ev.eval_G(iv(ev, 0)).contains(1)
        a = fixed_point.constants["a"]
        assert ev.eval_G(iv(ev, 1)).overlaps(a)
        # through one level of the recurrence as well
        assert ev.eval_G(iv(ev, 1), forced=1).overlaps(a)
        c = iv(ev, ev.G.domain.center)
        assert ev.eval_V(c).overlaps(delta_cert.constants["delta"])
        assert ev.eval_W(c).overlaps(noise_cert.constants["gamma"])


@pytest.mark.parametrize("which", ["G", "Gp", "V", "W"])
@pytest.mark.parametrize("x", [0.0, 0.6, 1.2])
def test_depth_consistency(ev, which, x):
    fn = {"G": ev.eval_G, "Gp": ev.eval_Gprime, "V": ev.eval_V, "W": ev.eval_W}[which]
    with local_context(ev.ctx):
        direct = fn(iv(ev, x))
        for forced in (1, 2):
            assert fn(iv(ev, x), forced=forced).overlaps(direct), forced


@pytest.mark.parametrize("x", [3.0, 6.5])
def test_deeper_budget_agrees_far_out(ev, x):
    with local_context(ev.ctx):
        shallow = ev.eval_G(iv(ev, x), depth=6)
        deep = ev.eval_G(iv(ev, x), depth=8, forced=1)
    assert shallow.overlaps(deep)
    assert float(shallow.width(ev.ctx)) < 1e-3


@pytest.mark.parametrize("x", [0.3, 1.0, 2.5, 5.0])
def test_difference_quotient_meets_derivative(ev, x):
    """(G(x+h) - G(x-h)) / 2h = G'(xi) for some xi in [x-h, x+h]."""
    ctx = ev.ctx
    h = 2.0**-12
    with local_context(ctx):
        q = ctx.div(ctx.sub(ev.eval_G(iv(ev, x + h)), ev.eval_G(iv(ev, x - h))), Interval(2 * h))
        d = ev.eval_Gprime(iv(ev, x - h, x + h))
    assert q.overlaps(d)


@pytest.mark.parametrize("x", [0.05, 0.3, 0.55, 0.8, 0.95])
def test_self_similarity(ev, fixed_point, x):
    """g(alpha x) = alpha g(g(x)) for the fixed point g(x) = G(x^4)."""
    ctx = ev.ctx
    alpha = fixed_point.constants["alpha"]
    with local_context(ctx):
        lhs = ev.evaluate("g", ctx.mul(alpha, iv(ev, x)))
        rhs = ctx.mul(alpha, ev.evaluate("g", ev.evaluate("g", iv(ev, x))))
    assert lhs.overlaps(rhs)


def test_noise_eigenfunction_is_nonnegative(run):
    rows = [line.split() for line in Path(run.dir, "plots", "w.tsv").read_text().splitlines() if not line.startswith("#")]
    assert len(rows) == run.cfg["plot"]["samples"]
    assert float(rows[0][0]) == -2.8 and float(rows[-1][1]) == 2.8
    assert min(float(r[2]) for r in rows) >= 0


def test_plot_files_cover_each_range(run):
    plots = Path(run.dir, "plots")
    for which in "GgVvWw":
        rows = [l.split("\t") for l in (plots / f"{which}.tsv").read_text().splitlines() if not l.startswith("#")]
        xs = [(float(a), float(b)) for a, b, *_ in rows]
        assert all(x1 == x0 for (_, x1), (x0, _) in zip(xs, xs[1:]))
        assert all(float(r[2]) <= float(r[3]) for r in rows)
    assert (plots / "spectrum_cover.tsv").exists()


def test_emit_rejects_bad_ranges(ev, tmp_path):
    with pytest.raises(ValueError):
        emit_plot_data(ev, "G", 1.0, 0.0, 10)
    with pytest.raises(ValueError):
        emit_plot_data(ev, "q", 0.0, 1.0, 10)
    rows = emit_plot_data(ev, "G", 0.0, 1.0, 4, tmp_path / "g.tsv")
    assert len(rows) == 4 and (tmp_path / "g.tsv").read_text().startswith("# function: G")


def test_budget_exhaustion_is_reported(ev):
    with pytest.raises(ExtensionError):
        ev.eval_G(iv(ev, 0.5), depth=1, forced=2)
