"""Acceptance criteria, one test each.  A PASS/FAIL line per criterion is
printed in the terminal summary."""

import subprocess
import sys
from contextlib import contextmanager
from decimal import Decimal, getcontext
from fractions import Fraction

from conftest import ACCEPTANCE, PROPERTY_SUITES
from renormproof.artifacts import agreed_digits, digits_agree_with
from renormproof.balls import Disc
from renormproof.interval import Interval, local_context
from renormproof.renorm import check_domain_extension

getcontext().prec = 60


@contextmanager
def criterion(k, detail=""):
    info = {"detail": detail}
    try:
        yield info
    except BaseException as exc:
        ACCEPTANCE[k] = ("FAIL", f"{info['detail']} {type(exc).__name__}: {exc}".strip())
        raise
    ACCEPTANCE[k] = ("PASS", info["detail"])


def F(s) -> Fraction:
    return Fraction(Decimal(s))


def inside(iv: Interval, lo: str, hi: str) -> bool:
    return F(lo) <= Fraction(*iv.lo.as_integer_ratio()) and Fraction(*iv.hi.as_integer_ratio()) <= F(hi)


def truncation_prefix(iv: Interval, prefix: str) -> bool:
    """Every point of iv starts with the digits of ``prefix`` (truncation)."""
    p = Decimal(prefix)
    ulp = Decimal(1).scaleb(p.as_tuple().exponent)
    lo, hi = (p, p + ulp) if p >= 0 else (p - ulp, p)
    return inside(iv, str(lo), str(hi))


def cert(run, stage):
    return run.payload(stage)["certificate"]


def test_criterion_1_fixed_point_certificate(run):
    with criterion(1) as info:
        c = cert(run, "fixed-point")
        eps, kappa = F(c["epsilon"]), F(c["kappa"])
        info["detail"] = f"N={c['N']} bits={c['precision_bits']} eps={float(eps):.3e} kappa={float(kappa):.3e} (ref eps 1.59e-21, kappa 6.88e-3)"
        assert c["N"] == 40 and c["precision_bits"] >= 132
        assert c["domain"] == Disc(0.5754, 0.8).to_dict()
        assert F(c["rho"]) == F("1e-20")
        assert c["verified"] and run.payload("fixed-point")["verified"]
        assert eps <= F("5e-21") and kappa <= F("5e-2")


def test_criterion_2_constants_a_alpha(fixed_point):
    with criterion(2) as info:
        a, alpha = fixed_point.constants["a"], fixed_point.constants["alpha"]
        na, nal = agreed_digits(a)[0], agreed_digits(alpha)[0]
        info["detail"] = f"a: {na} digits, alpha: {nal} digits"
        assert truncation_prefix(a, "-0.59160991663443815013")
        assert truncation_prefix(alpha, "-1.6903029714052448533")
        assert digits_agree_with(a, "-0.59160991663443815013", 20)
        assert digits_agree_with(alpha, "-1.6903029714052448533", 20)
        assert na >= 20 and nal >= 20


def test_criterion_3_delta(run, delta_cert):
    with criterion(3) as info:
        c = cert(run, "delta")
        d = delta_cert.constants["delta"]
        info["detail"] = f"eps={float(c['epsilon']):.3e} kappa={float(c['kappa']):.3e} delta: {agreed_digits(d)[0]} digits"
        assert c["verified"] and F(c["rho"]) == F("1e-15")
        assert F(c["epsilon"]) <= F("5e-16") and F(c["kappa"]) <= F("5e-2")
        assert inside(d, "7.28468621706", "7.28468621709")
        assert truncation_prefix(d, "7.28468621707334")


def test_criterion_4_gamma(run, noise_cert):
    with criterion(4) as info:
        c = cert(run, "noise")
        g = noise_cert.constants["gamma"]
        info["detail"] = f"eps={float(c['epsilon']):.3e} kappa={float(c['kappa']):.3e} gamma: {agreed_digits(g)[0]} digits"
        assert c["verified"] and F(c["rho"]) == F("1e-15")
        assert F(c["epsilon"]) <= F("5e-16") and F(c["kappa"]) <= F("5e-2")
        assert inside(g, "8.24391085424", "8.24391085427")
        assert truncation_prefix(g, "8.24391085425258")


def test_criterion_5_domain_extension(run, fixed_point):
    with criterion(5) as info:
        p = run.payload("fixed-point")
        ext, pair = p["domain_extension"], p["pair_domain_extension"]
        rc = run.cfg.renorm()
        small = Disc(rc.domain.center, float(rc.domain.radius) / 10)
        with local_context(rc.ctx):
            shrunk = check_domain_extension(fixed_point.enclosure, rc, 256, domain=small)
        info["detail"] = (
            f"Omega margin {ext['margin']:.3g}, pair margin {pair['margin']:.3g}, "
            f"shrunk disc fails at rectangle {shrunk.witness} ({shrunk.stage})"
        )
        assert ext["passed"] and ext["K"] == 256
        assert pair["passed"] and pair["K"] == 256
        assert [d["c"] for d in run.cfg["pair_domains"]] == ["-0.1", "0.85"]
        assert not shrunk.passed and shrunk.witness is not None


def test_criterion_6_spectrum(run, fixed_point):
    with criterion(6) as info:
        p = run.payload("spectrum")
        c = p["certificate"]
        alpha = fixed_point.constants["alpha"]
        ctx = run.cfg.ctx
        a4 = ctx.pow(alpha, 4)
        est = p["expanding_estimates"][0]
        info["detail"] = f"m={c['m']} regions={tuple(c['region_counts'])} coverings={tuple(c['counts'])} diag={est:.10f} alpha^4={float(a4.mid(ctx)):.10f}"
        assert c["verified"]
        assert c["counts"] == [16, 16, 1000]
        assert c["region_counts"][:2] == [1, 1] and sum(c["region_counts"]) == c["m"] + 1
        assert run.cfg["N"] == 40
        # agreement to 8 significant digits: within one unit of the 8th digit
        assert abs(Fraction(est) - Fraction(*a4.mid(ctx).as_integer_ratio())) < Fraction(1, 10**7)


def test_criterion_7_dependency_regression(run):
    with criterion(7) as info:
        p = run.payload("fixed-point")
        naive = p["naive_high_order_column"]
        simple = cert(run, "fixed-point")["diagnostics"]["high_order_column"]
        info["detail"] = f"naive column {naive:.4f}, simplified column {simple:.3e}"
        assert naive >= 2
        assert simple < 1


def test_criterion_8_bootstrap(run, delta_cert):
    with criterion(8) as info:
        b = run.payload("bootstrap")
        mu = b["mu"]["mu_inf"]
        ratio = F(b["mu"]["ratios"][-1])
        d = delta_cert.constants["delta"]
        gap = abs(ratio - Fraction(*d.mid(run.cfg.ctx).as_integer_ratio()))
        info["detail"] = f"mu_inf={mu[:22]} from k<={run.cfg['bootstrap']['k_max']}, |ratio - delta|={float(gap):.2e}"
        assert run.cfg["bootstrap"]["k_max"] == 20
        assert len(b["mu"]["superstable"]) == 20
        assert abs(F(mu) - F("1.594901356228820564")) < F("1e-11")
        assert gap < F("1e-4")


def test_criterion_9_property_suites(request):
    """Pass/fail comes from the property suites of this session; when they
    were not collected, they are run here in a subprocess."""
    collected = {item.nodeid for item in request.session.items}
    needed = " ".join(PROPERTY_SUITES.values()).split()
    if all(any(n.startswith(p) for n in collected) for p in needed):
        ACCEPTANCE[9] = ("DEFERRED", "")
        return
    with criterion(9, "property suites run in a subprocess"):
        r = subprocess.run([sys.executable, "-m", "pytest", "-q", *needed], capture_output=True, text=True)
        assert r.returncode == 0, r.stdout[-2000:]


def test_criterion_10_scaling_run(tmp_path):
    from renormproof import pipeline
    from renormproof.config import RunConfig

    with criterion(10) as info:
        cfg = RunConfig.load(overrides={"output": str(tmp_path), "N": 80, "precision": {"value": 265, "unit": "bits"}, "rho": {"fixed_point": "1e-41"}})
        pipeline.stage_bootstrap(cfg)
        p = pipeline.stage_fixed_point(cfg)
        c = p["certificate"]
        info["detail"] = f"N=80 eps={float(c['epsilon']):.3e} kappa={float(c['kappa']):.3e}"
        assert p["verified"]
        assert F(c["epsilon"]) <= F("1e-41") and F(c["kappa"]) <= F("1e-5")

