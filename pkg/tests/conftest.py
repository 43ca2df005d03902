import json
from pathlib import Path

import gmpy2
import pytest

from renormproof import pipeline
from renormproof.config import RunConfig
from renormproof.interval import ArithContext


class Run:
    """Artifacts of one full pipeline run at the default configuration."""

    def __init__(self, cfg, results):
        self.cfg = cfg
        self.results = results
        self.dir = Path(cfg["output"])

    def payload(self, stage):
        return self.results[stage]

    def raw(self, stage):
        return json.loads((self.dir / pipeline.FILES[stage]).read_text())


@pytest.fixture(scope="session")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = RunConfig.load(overrides={"output": str(out)})
    results = {}
    # any implicit rounding through the global (53-bit) gmpy2 context raises
    gctx = gmpy2.get_context()
    old = gctx.trap_inexact
    gctx.trap_inexact = True
    try:
        for stage in pipeline.ORDER:
            results[stage] = pipeline.STAGES[stage](cfg)
    finally:
        gctx.trap_inexact = old
    return Run(cfg, results)


@pytest.fixture(scope="session")
def ctx():
    return ArithContext(132)


@pytest.fixture(scope="session")
def fixed_point(run, ctx):
    return pipeline._load_cert(run.payload("fixed-point"), run.cfg, "fixed-point")


@pytest.fixture(scope="session")
def delta_cert(run, ctx):
    return pipeline._load_cert(run.payload("delta"), run.cfg, "delta")


@pytest.fixture(scope="session")
def noise_cert(run, ctx):
    return pipeline._load_cert(run.payload("noise"), run.cfg, "noise")


# ---------------------------------------------------------------------------
# acceptance report: one line per criterion at the end of the session

ACCEPTANCE: dict = {}
PROPERTY_SUITES = {
    "interval/rectangle oracle": "tests/test_interval.py",
    "function-ball members": "tests/test_balls.py",
    "determinant-test contract": "tests/test_spectrum.py::test_determinant_test_contract",
    "extension anchors and depth": "tests/test_extension.py::test_anchor_values tests/test_extension.py::test_depth_consistency",
}
_OUTCOMES: dict = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        _OUTCOMES.setdefault(report.nodeid, set()).add(report.outcome)


def _suite_status(prefixes):
    hits = {k: v for k, v in _OUTCOMES.items() if any(k.startswith(p) for p in prefixes.split())}
    if not hits:
        return None
    return all(v == {"passed"} for v in hits.values()), len(hits)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    if ACCEPTANCE.get(9, ("", ""))[0] == "DEFERRED":
        parts, ok = [], True
        for name, prefixes in PROPERTY_SUITES.items():
            st = _suite_status(prefixes)
            if st is None:
                parts.append(f"{name}: not run")
                ok = False
            else:
                parts.append(f"{name}: {st[1]} tests {'passed' if st[0] else 'FAILED'}")
                ok &= st[0]
        ACCEPTANCE[9] = ("PASS" if ok else "FAIL", "; ".join(parts))
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {status}  {detail}")
