"""Run configuration (JSON file plus command-line overrides)."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from .balls import Disc
from .interval import ArithContext, bits_for_digits
from .renorm import PairConfig, RenormConfig

DEFAULTS = {
    "N": 40,
    "precision": {"value": 132, "unit": "bits"},
    "d": 4,
    "domain": {"c": "0.5754", "r": "0.8"},
    "pair_domains": [{"c": "-0.1", "r": "0.7"}, {"c": "0.85", "r": "0.3"}],
    "rho": {"fixed_point": "1e-20", "delta": "1e-15", "noise": "1e-15"},
    "bootstrap": {"k_max": 20, "mu_precision": 96, "iterations": 50},
    "extension": {"K": 256},
    "spectrum": {
        "m": 20,
        "counts": [16, 16, 1000],
        "circles": None,  # [[center, radius], ...]; None: from the diagonal
        "mu_pieces": 64,
        "max_depth": 12,
    },
    "plot": {"samples": 500, "depth": 6, "functions": ["G", "g", "V", "v", "W", "w"]},
    "workers": 1,
    "output": "run",
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, extra: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    data: dict

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        data = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                data = _merge(data, json.loads(Path(path).read_text()))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        if overrides:
            data = _merge(data, overrides)
        cfg = cls(data)
        cfg.validate()
        return cfg

    def validate(self):
        d = self.data
        if int(d["N"]) < 2:
            raise ConfigError("N must be at least 2")
        if d["precision"].get("unit") not in ("bits", "digits"):
            raise ConfigError("precision unit must be 'bits' or 'digits'")
        if len(d["spectrum"]["counts"]) != 3:
            raise ConfigError("spectrum.counts needs three covering counts")
        if not 1 <= int(d["spectrum"]["m"]) <= int(d["N"]):
            raise ConfigError("spectrum.m must satisfy 1 <= m <= N")
        if int(d["workers"]) < 1:
            raise ConfigError("workers must be positive")
        self.renorm()  # domain checks

    @property
    def bits(self) -> int:
        p = self.data["precision"]
        return int(p["value"]) if p["unit"] == "bits" else bits_for_digits(int(p["value"]))

    @property
    def ctx(self) -> ArithContext:
        return ArithContext(self.bits)

    def disc(self, spec) -> Disc:
        return Disc(str(spec["c"]), str(spec["r"]))

    def renorm(self) -> RenormConfig:
        return RenormConfig(self.disc(self.data["domain"]), int(self.data["N"]), int(self.data["d"]), self.ctx)

    def pair(self) -> PairConfig:
        p0, p1 = self.data["pair_domains"]
        return PairConfig(self.disc(p0), self.disc(p1), int(self.data["N"]), self.ctx)

    def __getitem__(self, key):
        return self.data[key]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)
