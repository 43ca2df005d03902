"""Pipeline stages.  Every rigorous stage reads its inputs from verified
artifact files written by earlier stages."""

from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from . import approx as A
from . import balls as B
from .artifacts import digits_report, read_artifact, write_artifact
from .config import RunConfig
from .contraction import ProofCertificate, scheme_delta_eigen, scheme_fixed_point, scheme_noise, verify_contraction
from .extension import ExtendedEvaluator, emit_plot_data
from .interval import Interval, exact_decimal, local_context
from .renorm import SymmetricPairSource, check_domain_extension, check_domain_extension_pair
from .spectrum import Circle, certify_spectrum, covering_plot_data

log = logging.getLogger(__name__)

FILES = {
    "bootstrap": "bootstrap.json",
    "fixed-point": "fixed_point.json",
    "spectrum": "spectrum.json",
    "delta": "delta.json",
    "noise": "noise.json",
    "digits": "digits.json",
}

# stage -> artifacts it consumes
DEPENDS = {
    "bootstrap": (),
    "fixed-point": ("bootstrap",),
    "spectrum": ("bootstrap", "fixed-point"),
    "delta": ("bootstrap", "fixed-point"),
    "noise": ("bootstrap", "fixed-point"),
    "digits": ("fixed-point", "delta", "noise"),
    "plot": ("fixed-point",),
}


class StageError(RuntimeError):
    pass


def _path(cfg: RunConfig, stage: str) -> Path:
    return Path(cfg["output"]) / FILES[stage]


def load(cfg: RunConfig, stage: str, needed_by: str) -> dict:
    try:
        return read_artifact(_path(cfg, stage), stage)
    except FileNotFoundError as exc:  # pragma: no cover - read_artifact raises its own
        raise StageError(str(exc)) from exc
    except Exception as exc:
        raise StageError(f"{needed_by} requires the {stage} artifact: {exc}") from exc


def _strs(xs):
    return [exact_decimal(x) for x in xs]


def _rows_out(rows):
    return [_strs(r) for r in rows]


def _rows_in(rows, ctx):
    return [[ctx.point(s) for s in r] for r in rows]


def _series_in(coeffs, cfg: RunConfig) -> A.ApproxSeries:
    ctx = cfg.ctx
    return A.ApproxSeries(tuple(ctx.point(s) for s in coeffs), cfg.renorm().domain)


def _load_cert(payload: dict, cfg: RunConfig, stage: str) -> ProofCertificate:
    cert = ProofCertificate.from_dict(payload["certificate"], cfg.ctx)
    if not (cert.verified and payload.get("verified")):
        raise StageError(f"the {stage} certificate is not verified")
    return cert


# ---------------------------------------------------------------------------
# stages


def stage_bootstrap(cfg: RunConfig) -> dict:
    """Nonrigorous approximations consumed by the proofs."""
    ctx = cfg.ctx
    rc = cfg.renorm()
    bs = cfg["bootstrap"]
    t = time.time()
    with local_context(ctx):
        mu = A.find_mu_infinity(int(bs["k_max"]), int(bs["mu_precision"]))
        boot = A.bootstrap_G0(mu.mu_inf, rc.domain, rc.N, int(bs["iterations"]), ctx, rc.d)
        newton = A.newton_refine(boot.G, ctx, d=rc.d)
        G0 = newton.G
        parts = A.renorm_parts(list(G0.coeffs), rc.domain, ctx, rc.d)
        delta_rows = A.derivative_matrix(G0, ctx, rc.d, parts=parts)
        V = A.approx_delta_eigen(delta_rows, rc.domain, ctx, a_value=parts.a)
        noise_rows = A.noise_matrix(G0, ctx, rc.d)
        W = A.approx_noise_eigen(noise_rows, rc.domain, ctx)
    payload = {
        "mu": {
            "mu_inf": exact_decimal(mu.mu_inf),
            "superstable": _strs(mu.mus),
            "ratios": _strs(mu.ratios),
            "extrapolated": _strs(mu.extrapolations),
        },
        "iteration_residuals": boot.residuals,
        "newton_residuals": newton.residuals,
        "G0": _strs(G0.coeffs),
        "a": exact_decimal(parts.a),
        "delta_rows": _rows_out(delta_rows),
        "V0": _strs(V.vector.coeffs),
        "delta_estimate": exact_decimal(V.eigenvalue),
        "noise_rows": _rows_out(noise_rows),
        "W0": _strs(W.vector.coeffs),
        "gamma_sq_estimate": exact_decimal(W.eigenvalue),
        "config": cfg.to_dict(),
        "seconds": round(time.time() - t, 2),
    }
    write_artifact(_path(cfg, "bootstrap"), "bootstrap", payload)
    return payload


def _summary(cert: ProofCertificate) -> dict:
    return {"id": cert.scheme, "verified": cert.verified, "epsilon": cert.epsilon, "rho": cert.rho, "kappa": cert.kappa}


def stage_fixed_point(cfg: RunConfig) -> dict:
    boot = load(cfg, "bootstrap", "prove-fixed-point")
    ctx = cfg.ctx
    rc = cfg.renorm()
    with local_context(ctx):
        G0 = _series_in(boot["G0"], cfg).to_ball(ctx)
        delta_rows = _rows_in(boot["delta_rows"], ctx)
        scheme = scheme_fixed_point(G0, delta_rows, rc)
        cert = verify_contraction(scheme, cfg["rho"]["fixed_point"], int(cfg["workers"]))
        ext = pair = None
        if cert.verified:
            K = int(cfg["extension"]["K"])
            ext = check_domain_extension(cert.enclosure, rc, K)
            pair = check_domain_extension_pair(SymmetricPairSource(cert.enclosure, rc.d), cfg.pair(), K)
    verified = bool(cert.verified and ext and pair)
    payload = {
        "certificate": cert.to_dict(),
        "domain_extension": _ext_dict(ext),
        "pair_domain_extension": _ext_dict(pair),
        "naive_high_order_column": None,
        "verified": verified,
        "summary": _summary(cert) | {"verified": verified},
    }
    if cert.verified:
        st = scheme.prepare(ctx.convert(cfg["rho"]["fixed_point"]).hi)
        payload["naive_high_order_column"] = float(B.ball_norm_upper(scheme.naive_high_column(st), ctx))
    write_artifact(_path(cfg, "fixed-point"), "fixed-point", payload)
    return payload


def _ext_dict(r):
    if r is None:
        return None
    return {"passed": r.passed, "margin": r.margin, "K": r.K, "witness": r.witness, "stage": r.stage, "margins": list(r.margins)}


def stage_spectrum(cfg: RunConfig) -> dict:
    boot = load(cfg, "bootstrap", "prove-spectrum")
    fp = load(cfg, "fixed-point", "prove-spectrum")
    ctx = cfg.ctx
    rc = cfg.renorm()
    sp = cfg["spectrum"]
    with local_context(ctx):
        cert = _load_cert(fp, cfg, "fixed-point")
        rows = _rows_in(boot["delta_rows"], ctx)
        circles = [Circle(float(c), float(r)) for c, r in sp["circles"]] if sp["circles"] else None
        sc = certify_spectrum(
            cert.enclosure, rows, rc, int(sp["m"]), circles, tuple(sp["counts"]), int(sp["mu_pieces"]), int(sp["max_depth"])
        )
    payload = {
        "certificate": sc.to_dict(),
        "verified": sc.verified,
        "expanding_estimates": [sc.diagonal[0].real, sc.diagonal[1].real],
        "summary": {"id": "spectrum", "verified": sc.verified, "regions": list(sc.region_counts)},
    }
    write_artifact(_path(cfg, "spectrum"), "spectrum", payload)
    return payload


def stage_delta(cfg: RunConfig) -> dict:
    boot = load(cfg, "bootstrap", "prove-delta")
    fp = load(cfg, "fixed-point", "prove-delta")
    ctx = cfg.ctx
    rc = cfg.renorm()
    with local_context(ctx):
        G = _load_cert(fp, cfg, "fixed-point").enclosure
        V0 = _series_in(boot["V0"], cfg).to_ball(ctx)
        scheme = scheme_delta_eigen(G, V0, _rows_in(boot["delta_rows"], ctx), rc)
        cert = verify_contraction(scheme, cfg["rho"]["delta"], int(cfg["workers"]))
        naive = None
        if cert.verified:
            st = scheme.prepare(ctx.convert(cfg["rho"]["delta"]).hi)
            naive = float(B.ball_norm_upper(scheme.naive_high_column(st), ctx))
    payload = {"certificate": cert.to_dict(), "verified": cert.verified, "naive_high_order_column": naive, "summary": _summary(cert)}
    write_artifact(_path(cfg, "delta"), "delta", payload)
    return payload


def stage_noise(cfg: RunConfig) -> dict:
    boot = load(cfg, "bootstrap", "prove-noise")
    fp = load(cfg, "fixed-point", "prove-noise")
    ctx = cfg.ctx
    rc = cfg.renorm()
    with local_context(ctx):
        G = _load_cert(fp, cfg, "fixed-point").enclosure
        W0 = _series_in(boot["W0"], cfg).to_ball(ctx)
        scheme = scheme_noise(G, W0, _rows_in(boot["noise_rows"], ctx), rc)
        cert = verify_contraction(scheme, cfg["rho"]["noise"], int(cfg["workers"]))
    payload = {"certificate": cert.to_dict(), "verified": cert.verified, "summary": _summary(cert)}
    write_artifact(_path(cfg, "noise"), "noise", payload)
    return payload


def stage_digits(cfg: RunConfig) -> dict:
    consts = {}
    for stage in ("fixed-point", "delta", "noise"):
        try:
            p = load(cfg, stage, "digits")
        except StageError:
            if stage == "fixed-point":
                raise
            continue
        cert = _load_cert(p, cfg, stage)
        consts.update(cert.constants)
    report = digits_report(consts)
    payload = {"report": report, "verified": True}
    write_artifact(_path(cfg, "digits"), "digits", payload)
    return payload


def stage_plot(cfg: RunConfig) -> dict:
    """Covering files for G, g, V, v, W, w and the circle coverings."""
    ctx = cfg.ctx
    rc = cfg.renorm()
    pl = cfg["plot"]
    out = Path(cfg["output"]) / "plots"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with local_context(ctx):
        fp = _load_cert(load(cfg, "fixed-point", "plot"), cfg, "fixed-point")
        kw = {}
        for stage, fn, const in (("delta", "V", "delta"), ("noise", "W", "gamma")):
            try:
                c = _load_cert(load(cfg, stage, "plot"), cfg, stage)
            except StageError:
                continue
            kw[fn] = c.refined
            kw[const] = c.constants[const]
        ev = ExtendedEvaluator(fp.refined, rc.d, depth=int(pl["depth"]), ctx=ctx, **kw)
        c, r = float(rc.domain.center), float(rc.domain.radius)
        # beyond the disc (x up to about alpha^4, i.e. |x| up to alpha^2 in g-form)
        ranges = {k: (c - r, 8.0) for k in "GVW"} | {k: (-2.8, 2.8) for k in "gvw"}
        for which in pl["functions"]:
            if which in "Vv" and "V" not in kw or which in "Ww" and "W" not in kw:
                continue
            p = out / f"{which}.tsv"
            lo, hi = ranges[which]
            emit_plot_data(ev, which, lo, hi, int(pl["samples"]), p, meta={"domain": f"D({c}, {r})"})
            written.append(str(p))
        try:
            sp = load(cfg, "spectrum", "plot")["certificate"]
            circles = [Circle(x["center"], x["radius"]) for x in sp["circles"]]
            p = out / "spectrum_cover.tsv"
            with open(p, "w") as fh:
                fh.write("# columns: circle re_lo re_hi im_lo im_hi\n")
                for row in covering_plot_data(circles, sp["counts"], ctx):
                    fh.write("\t".join(repr(v) for v in row) + "\n")
            written.append(str(p))
        except StageError:
            pass
    return {"files": written, "verified": True}


STAGES = {
    "bootstrap": stage_bootstrap,
    "fixed-point": stage_fixed_point,
    "spectrum": stage_spectrum,
    "delta": stage_delta,
    "noise": stage_noise,
    "digits": stage_digits,
    "plot": stage_plot,
}

ORDER = ("bootstrap", "fixed-point", "spectrum", "delta", "noise", "digits", "plot")
