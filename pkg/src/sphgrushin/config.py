"""Flat ``key = value`` configuration with typed defaults."""
from __future__ import annotations

import hashlib
import math

__all__ = ["ConfigError", "DEFAULTS", "load_config", "parse_config_text", "config_hash", "Config"]


class ConfigError(ValueError):
    """Bad key, bad value or inconsistent settings."""


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


# key -> (default, parser); beta constants come from the grid search in
# carleman.search_beta_constants for the default region
DEFAULTS = {
    "region.a": (0.6, float),
    "region.b": (1.2, float),
    "truncation.L": (40, int),
    "modes.nMax": (8, int),
    "quadrature.order": (0, int),
    "time.T": (1.0, float),
    "time.steps": (50, int),
    "hum.epsilonList": ([1e-2, 1e-4, 1e-6], _floats),
    "carleman.aPrime": (0.8, float),
    "carleman.bPrime": (1.0, float),
    "carleman.A1": (7.0, float),
    "carleman.A2": (12.0, float),
    "carleman.A3": (10.0, float),
    "carleman.sFactor": (1.0, float),
    "output.dir": ("out", str),
    "mintime.nList": ([10, 20, 40, 60, 80, 100], _ints),
    "mintime.TList": ([0.6], _floats),
    "init.modes": ("1:1:1", str),
}


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = val
    return out


class Config(dict):
    """Typed settings; ``cfg['time.T']`` etc."""

    def canonical(self) -> str:
        """Sorted ``key=value`` lines; the output location is not part of it."""
        lines = []
        for k in sorted(self):
            if k == "output.dir":
                continue
            v = self[k]
            if isinstance(v, list):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k}={v}")
        return "\n".join(lines)

    def check(self):
        a, b = self["region.a"], self["region.b"]
        if not 0 < a < b <= math.pi / 2:
            raise ConfigError(f"region needs 0 < a < b <= pi/2, got a={a}, b={b}")
        if self["truncation.L"] < self["modes.nMax"] or self["modes.nMax"] < 0:
            raise ConfigError("need 0 <= modes.nMax <= truncation.L")
        if self["time.T"] <= 0 or self["time.steps"] < 1:
            raise ConfigError("time.T must be positive and time.steps >= 1")
        if self["quadrature.order"] < 0 or 0 < self["quadrature.order"] < 2:
            raise ConfigError("quadrature.order must be 0 (auto) or >= 2")
        if not self["hum.epsilonList"] or min(self["hum.epsilonList"]) <= 0:
            raise ConfigError("hum.epsilonList needs positive values")
        if min(self["carleman.A1"], self["carleman.A2"], self["carleman.A3"],
               self["carleman.sFactor"]) <= 0:
            raise ConfigError("carleman constants must be positive")
        return self


def load_config(path=None, overrides=None) -> Config:
    """Defaults, then the file (if any), then ``overrides`` (flag values)."""
    raw = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            raw.update(parse_config_text(fh.read()))
    for k, v in (overrides or {}).items():
        if v is not None:
            if k not in DEFAULTS:
                raise ConfigError(f"unknown key {k!r}")
            raw[k] = v
    cfg = Config()
    for key, (default, parse) in DEFAULTS.items():
        if key in raw:
            try:
                cfg[key] = parse(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw[key]!r}") from exc
        else:
            cfg[key] = list(default) if isinstance(default, list) else default
    return cfg.check()


def config_hash(cfg: Config) -> str:
    return hashlib.sha256(cfg.canonical().encode("utf-8")).hexdigest()[:16]
