"""Flat key=value run configuration with flag overrides.

A config file holds one ``key = value`` pair per line (# comments and
blank lines ignored).  Command line flags override file values, which
override the built-in defaults.  The resolved configuration hashes to a
stable digest that the manifest records next to every output.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields


class ConfigError(ValueError):
    """A configuration value is missing, unknown, or out of range."""


def _parse_int_tuple(text):
    try:
        return tuple(int(tok) for tok in str(text).replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _parse_opt_float(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return float(text)


@dataclass
class RunConfig:
    """Every knob the pipeline commands understand, flat and diffable."""

    dataset: str = ""
    out: str = "out"
    seed: int = 9876
    ratios: tuple = (8, 1, 1)
    min_user_events: int = 0
    min_item_raters: int = 0
    graph: str = "hypergraph"
    k: int = 1000
    method: str = "exact"
    l: int = 0            # nystrom sample size; 0 = auto (4k capped at n)
    p: int = 10
    q: int = 2
    kernel: str = "tikhonov"
    gamma: float = 1.0
    a: float = 4.0
    omega: float | None = None
    phi: float = 10.0
    sigma_eta: float = 1e-4
    sigma_nu: float = 1e-4
    cutoffs: tuple = (10, 50, 100)
    threads: int = 1

    def validate(self) -> "RunConfig":
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios) or sum(self.ratios) <= 0:
            raise ConfigError(f"ratios must be three nonnegative integers, got {self.ratios}")
        if self.graph not in ("hypergraph", "covariance"):
            raise ConfigError(f"graph must be hypergraph or covariance, got {self.graph!r}")
        if self.method not in ("exact", "nystrom"):
            raise ConfigError(f"method must be exact or nystrom, got {self.method!r}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.l < 0 or self.p < 0 or self.q < 1:
            raise ConfigError("need l >= 0, p >= 0, q >= 1")
        if self.kernel not in ("tikhonov", "diffusion", "random-walk", "inverse-cosine", "cutoff"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.kernel == "cutoff" and self.omega is None:
            raise ConfigError("cutoff kernel needs omega")
        if self.gamma < 0 or self.a < 2 or self.phi <= 0:
            raise ConfigError("need gamma >= 0, a >= 2, phi > 0")
        if self.sigma_eta < 0 or self.sigma_nu < 0:
            raise ConfigError("noise variances must be >= 0")
        if not self.cutoffs or any(c < 1 for c in self.cutoffs):
            raise ConfigError(f"cutoffs must be positive integers, got {self.cutoffs}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        return self

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            out[f.name] = v
        return out


_COERCERS = {
    "dataset": str,
    "out": str,
    "seed": int,
    "ratios": _parse_int_tuple,
    "min_user_events": int,
    "min_item_raters": int,
    "graph": str,
    "k": int,
    "method": str,
    "l": int,
    "p": int,
    "q": int,
    "kernel": str,
    "gamma": float,
    "a": float,
    "omega": _parse_opt_float,
    "phi": float,
    "sigma_eta": float,
    "sigma_nu": float,
    "cutoffs": _parse_int_tuple,
    "threads": int,
}


def parse_config_file(path) -> dict:
    """Read key = value lines into a raw string map."""
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {stripped!r}")
            key, _, value = stripped.partition("=")
            raw[key.strip()] = value.strip()
    return raw


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults <- config file <- flags, with type coercion and validation."""
    cfg = RunConfig()
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in _COERCERS:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                setattr(cfg, key, _COERCERS[key](value))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from None
    return cfg.validate()


def config_hash(cfg: RunConfig) -> str:
    """Stable digest of the resolved configuration."""
    lines = sorted(f"{k}={v}" for k, v in cfg.to_dict().items())
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()
