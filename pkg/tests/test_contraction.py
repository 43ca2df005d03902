from fractions import Fraction

import pytest

from renormproof import balls as B
from renormproof import pipeline
from renormproof.contraction import ProofCertificate, bound_kappa, scheme_fixed_point, verify_contraction
from renormproof.interval import Interval, local_context
from renormproof.renorm import apply_T


@pytest.fixture(scope="module")
def scheme(run):
    cfg = run.cfg
    boot = run.payload("bootstrap")
    ctx = cfg.ctx
    G0 = pipeline._series_in(boot["G0"], cfg).to_ball(ctx)
    return scheme_fixed_point(G0, pipeline._rows_in(boot["delta_rows"], ctx), cfg.renorm())


@pytest.mark.parametrize("stage", ["fixed-point", "delta", "noise"])
def test_verified_iff_contraction_inequality(run, stage):
    c = run.payload(stage)["certificate"]
    eps, kappa, rho = (Fraction(c[k]) for k in ("epsilon", "kappa", "rho"))
    assert c["verified"] == (kappa < 1 and eps < rho * (1 - kappa))
    assert c["verified"] and c["enclosure"] is not None


def test_half_epsilon_radius_does_not_verify(run, scheme):
    eps = Fraction(run.payload("fixed-point")["certificate"]["epsilon"])
    cert = verify_contraction(scheme, str(float(eps / 2)))
    assert not cert.verified
    assert cert.enclosure is None and cert.constants == {}


def test_enclosure_is_the_rho_ball(fixed_point, scheme, run):
    with local_context(scheme.ctx):
        expected = scheme.inflate(run.cfg["rho"]["fixed_point"])
    got = fixed_point.enclosure
    assert (got.lo, got.up, got.hi, got.err) == (expected.lo, expected.up, expected.hi, expected.err)


def test_refined_ball_is_inside_the_rho_ball(fixed_point, scheme):
    ctx = scheme.ctx
    X0, R = scheme.center, fixed_point.refined
    dev = ctx.up.add(R.hi, R.err)
    for x, lo, up in zip(X0.lo, R.lo, R.up):
        dev = ctx.up.add(dev, max(ctx.up.sub(up, x), ctx.up.sub(x, lo)))
    assert dev <= fixed_point.enclosure.err
    assert Fraction(fixed_point.radius_exact) < Fraction(fixed_point.epsilon_exact) * 2


def test_image_of_refined_ball_meets_it(fixed_point, run):
    rc = run.cfg.renorm()
    with local_context(rc.ctx):
        TR = apply_T(fixed_point.refined, rc)
    R = fixed_point.refined
    slack = rc.ctx.up.add(rc.ctx.up.add(R.err, TR.err), rc.ctx.up.add(R.hi, TR.hi))
    for a, b, c, d in zip(R.lo, R.up, TR.lo, TR.up):
        assert c <= rc.ctx.up.add(b, slack) and a <= rc.ctx.up.add(d, slack)


def test_naive_and_simplified_high_columns(run, scheme):
    ctx = scheme.ctx
    with local_context(ctx):
        st = scheme.prepare(ctx.convert(run.cfg["rho"]["fixed_point"]).hi)
        naive = scheme.naive_high_column(st)
        simple = scheme.high_column(st)
        n1, n2 = B.ball_norm_upper(naive, ctx), B.ball_norm_upper(simple, ctx)
    assert n1 >= 2 and n2 < 1
    # both enclose the same action, so their coefficient ranges intersect
    slack = ctx.up.add(ctx.up.add(naive.err, simple.err), ctx.up.add(naive.hi, simple.hi))
    for a, b, c, d in zip(naive.lo, naive.up, simple.lo, simple.up):
        assert c <= ctx.up.add(b, slack) and a <= ctx.up.add(d, slack)


def test_certificate_round_trip(fixed_point, run):
    data = run.payload("fixed-point")["certificate"]
    again = ProofCertificate.from_dict(data, run.cfg.ctx).to_dict()
    assert again == data


def test_parallel_columns_match_serial(run, scheme):
    rho = run.cfg["rho"]["fixed_point"]
    serial = bound_kappa(scheme, rho, 1)
    parallel = bound_kappa(scheme, rho, 2)
    assert serial.kappa == parallel.kappa
    assert serial.columns == parallel.columns


def test_constants_match_alpha_identity(fixed_point, ctx):
    a, alpha = fixed_point.constants["a"], fixed_point.constants["alpha"]
    assert ctx.mul(a, alpha).contains(1)
    assert Interval(-1, 0).contains(a)
