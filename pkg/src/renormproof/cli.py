"""Command-line entry point: ``renormproof <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from .artifacts import ArtifactError
from .config import ConfigError, RunConfig
from .pipeline import ORDER, STAGES, StageError

COMMANDS = {
    "bootstrap": ("bootstrap",),
    "prove-fixed-point": ("fixed-point",),
    "prove-spectrum": ("spectrum",),
    "prove-delta": ("delta",),
    "prove-noise": ("noise",),
    "digits": ("digits",),
    "plot": ("plot",),
    "all": ORDER,
}


def _overrides(args) -> dict:
    o: dict = {}
    if args.N is not None:
        o["N"] = args.N
    if args.bits is not None:
        o["precision"] = {"value": args.bits, "unit": "bits"}
    if args.digits is not None:
        o["precision"] = {"value": args.digits, "unit": "digits"}
    if args.domain is not None:
        c, r = args.domain
        o["domain"] = {"c": c, "r": r}
    if args.workers is not None:
        o["workers"] = args.workers
    if args.output is not None:
        o["output"] = args.output
    for key, stage in (("rho_fixed_point", "fixed_point"), ("rho_delta", "delta"), ("rho_noise", "noise")):
        v = getattr(args, key)
        if v is not None:
            o.setdefault("rho", {})[stage] = v
    if args.m is not None:
        o.setdefault("spectrum", {})["m"] = args.m
    if args.counts is not None:
        o.setdefault("spectrum", {})["counts"] = args.counts
    if args.mu_pieces is not None:
        o.setdefault("spectrum", {})["mu_pieces"] = args.mu_pieces
    if args.K is not None:
        o["extension"] = {"K": args.K}
    if args.k_max is not None:
        o["bootstrap"] = {"k_max": args.k_max}
    if args.samples is not None:
        o.setdefault("plot", {})["samples"] = args.samples
    return o


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="renormproof", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--output", help="artifact directory")
    p.add_argument("--N", type=int, help="truncation degree")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--bits", type=int, help="working precision in bits")
    g.add_argument("--digits", type=int, help="working precision in decimal digits")
    p.add_argument("--domain", nargs=2, metavar=("C", "R"), help="disc center and radius")
    p.add_argument("--rho-fixed-point", dest="rho_fixed_point")
    p.add_argument("--rho-delta", dest="rho_delta")
    p.add_argument("--rho-noise", dest="rho_noise")
    p.add_argument("--m", type=int, help="retained modes of the contracted matrix")
    p.add_argument("--counts", type=int, nargs=3, metavar="K", help="circle covering counts")
    p.add_argument("--mu-pieces", dest="mu_pieces", type=int)
    p.add_argument("--K", type=int, help="boundary rectangles for domain extension")
    p.add_argument("--k-max", dest="k_max", type=int, help="largest superstable period exponent")
    p.add_argument("--samples", type=int, help="rectangles per plot covering")
    p.add_argument("--workers", type=int)
    p.add_argument("--json", action="store_true", help="print summaries as JSON lines")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _line(stage: str, result: dict, as_json: bool) -> str:
    s = result.get("summary") or {"id": stage, "verified": result.get("verified")}
    if as_json:
        return json.dumps(s, sort_keys=True)
    parts = [f"{s.get('id', stage)}", f"verified={s.get('verified')}"]
    for k in ("epsilon", "rho", "kappa"):
        if k in s:
            parts.append(f"{k}={s[k]:.3e}")
    if "regions" in s:
        parts.append(f"regions={tuple(s['regions'])}")
    return " ".join(parts)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = RunConfig.load(args.config, _overrides(args))
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    ok = True
    for stage in COMMANDS[args.command]:
        t = time.time()
        try:
            result = STAGES[stage](cfg)
        except (StageError, ArtifactError) as exc:
            print(f"{stage}: {exc}", file=sys.stderr)
            return 1
        if stage == "digits":
            for row in result["report"]:
                print(f"{row['constant']}: {row['digits']} digits {row['value']}")
        elif stage == "plot":
            for f in result["files"]:
                print(f"wrote {f}")
        elif stage != "bootstrap":
            print(_line(stage, result, args.json))
        else:
            print(f"bootstrap mu_inf={result['mu']['mu_inf'][:24]} seconds={result['seconds']}")
        logging.info("%s finished in %.1f s", stage, time.time() - t)
        if not result.get("verified", True):
            ok = False
            if args.command == "all":
                print(f"{stage}: not verified; stopping", file=sys.stderr)
                return 1
    return 0 if ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
