"""Artifact files: versioned JSON with a SHA-256 digest of the payload, and the
digit report for certified constants."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from decimal import ROUND_HALF_EVEN, Context, Decimal
from pathlib import Path

from gmpy2 import mpfr

from .interval import Interval, exact_decimal

FORMAT_VERSION = 1
_DEC = Context(prec=800)


class ArtifactError(RuntimeError):
    pass


class MissingArtifact(ArtifactError):
    pass


class TamperedArtifact(ArtifactError):
    pass


def canonical(payload) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


def digest(payload) -> str:
    return hashlib.sha256(canonical(payload)).hexdigest()


def write_artifact(path, kind: str, payload: dict, timestamp: bool = True) -> str:
    """Write ``payload`` under ``kind``; returns the digest.

    The digest covers the payload only, so the ``meta`` block (creation time)
    can change without invalidating it.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h = digest(payload)
    doc = {"kind": kind, "format": FORMAT_VERSION, "sha256": h, "payload": payload}
    if timestamp:
        doc["meta"] = {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return h


def read_artifact(path, kind: str | None = None) -> dict:
    """Load and verify an artifact; raises on a missing file, wrong kind or
    digest mismatch."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"missing artifact {path}" + (f" ({kind})" if kind else ""))
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise TamperedArtifact(f"{path}: not valid JSON") from exc
    if kind is not None and doc.get("kind") != kind:
        raise ArtifactError(f"{path}: expected a {kind} artifact, found {doc.get('kind')!r}")
    if doc.get("format") != FORMAT_VERSION:
        raise ArtifactError(f"{path}: unsupported format {doc.get('format')!r}")
    if digest(doc["payload"]) != doc.get("sha256"):
        raise TamperedArtifact(f"{path}: content digest mismatch")
    return doc["payload"]


# ---------------------------------------------------------------------------
# digits


def _round_sig(x: Decimal, k: int) -> Decimal:
    q = Decimal(1).scaleb(x.adjusted() - k + 1)
    return x.quantize(q, rounding=ROUND_HALF_EVEN, context=_DEC)


def agreed_digits(x: Interval, max_digits: int = 80) -> tuple[int, str]:
    """Largest k such that every point of ``x`` rounds to the same k
    significant digits, with that common rounding.

    Rounding to k digits is monotone, so it suffices to compare the
    endpoints.  Returns ``(0, "")`` when the interval contains 0.
    """
    lo, hi = Decimal(exact_decimal(x.lo)), Decimal(exact_decimal(x.hi))
    if lo <= 0 <= hi:
        return 0, ""
    best = (0, "")
    for k in range(1, max_digits + 1):
        a, b = _round_sig(lo, k), _round_sig(hi, k)
        if a == b:
            best = (k, format(a, "f"))
    return best


def digits_agree_with(x: Interval, reference: str, k: int) -> bool:
    """Every point of ``x`` lies within one unit in the k-th significant
    place of ``reference``."""
    ref = Decimal(reference)
    tol = Decimal(1).scaleb(ref.adjusted() - k + 1)
    lo, hi = Decimal(exact_decimal(x.lo)), Decimal(exact_decimal(x.hi))
    return max(_DEC.abs(_DEC.subtract(lo, ref)), _DEC.abs(_DEC.subtract(hi, ref))) < tol


def digits_report(constants: dict[str, Interval]) -> list[dict]:
    out = []
    for name, iv in constants.items():
        n, text = agreed_digits(iv)
        out.append({"constant": name, "digits": n, "value": text, "enclosure": iv.to_strings()})
    return out
