"""Experiment configuration: defaults, TOML/JSON loading, validation."""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


# dotted config key -> field name
KEY_MAP = {
    "d": "d",
    "m": "m",
    "train_percent": "train_percent",
    "seed": "seed",
    "trials": "trials",
    "smoothing.enabled": "smoothing_enabled",
    "smoothing.cutoff": "smoothing_cutoff",
    "gap.slack": "gap_slack",
    "legendre.kappa_max": "legendre_kappa_max",
    "diffusion.epsilon": "diffusion_epsilon",
    "diffusion.mode": "diffusion_mode",
    "diffusion.kappa_max": "diffusion_kappa_max",
    "diffusion.k_max": "diffusion_k_max",
    "rate.denominator_factor": "rate_denominator_factor",
    "eval.test_only": "eval_test_only",
    "krr.sigma": "krr_sigma",
    "krr.gamma": "krr_gamma",
    "krr.scale_by_m": "krr_scale_by_m",
    "workers": "workers",
}


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 7
    m: int = 6
    train_percent: float = 30.0
    seed: int = 0
    trials: int = 100
    smoothing_enabled: bool = False
    smoothing_cutoff: float = 0.8
    gap_slack: float = 0.01
    legendre_kappa_max: float = 1e6
    diffusion_epsilon: float | None = None
    diffusion_mode: str = "random_walk"
    diffusion_kappa_max: float = 1e6
    diffusion_k_max: int = 50
    rate_denominator_factor: float = 2.0
    eval_test_only: bool = False
    krr_sigma: float = 100.0
    krr_gamma: float = 1e-4
    krr_scale_by_m: bool = True
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.d < 2:
            problems.append("d must be >= 2")
        if self.m < 1:
            problems.append("m must be >= 1")
        if not 0 < self.train_percent < 100:
            problems.append("train_percent must lie in (0, 100)")
        if self.trials < 1:
            problems.append("trials must be >= 1")
        if not 0 < self.smoothing_cutoff < 1:
            problems.append("smoothing.cutoff must lie in (0, 1)")
        if not 0 <= self.gap_slack < 1:
            problems.append("gap.slack must lie in [0, 1)")
        if self.diffusion_mode not in ("random_walk", "unnormalized"):
            problems.append("diffusion.mode must be 'random_walk' or 'unnormalized'")
        if self.diffusion_epsilon is not None and self.diffusion_epsilon <= 0:
            problems.append("diffusion.epsilon must be positive")
        if self.diffusion_k_max < 1:
            problems.append("diffusion.k_max must be >= 1")
        if self.legendre_kappa_max < 1 or self.diffusion_kappa_max < 1:
            problems.append("kappa_max values must be >= 1")
        if self.rate_denominator_factor not in (1, 2):
            problems.append("rate.denominator_factor must be 1 or 2")
        if self.krr_sigma <= 0 or self.krr_gamma <= 0:
            problems.append("krr.sigma and krr.gamma must be positive")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    @classmethod
    def from_mapping(cls, doc: Mapping[str, Any]) -> "ExperimentConfig":
        """Build from a nested (``{"smoothing": {"enabled": true}}``) or dotted mapping."""
        flat = _flatten(doc)
        unknown = sorted(set(flat) - set(KEY_MAP))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for key, value in flat.items():
            name = KEY_MAP[key]
            kwargs[name] = _coerce(key, value, types[name])
        return cls(**kwargs)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        try:
            return dataclasses.replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return {key: getattr(self, name) for key, name in KEY_MAP.items()}


def _flatten(doc: Mapping[str, Any], prefix: str = "") -> dict:
    out = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, Mapping):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key: str, value, type_name) -> Any:
    t = str(type_name)
    try:
        if t.startswith("bool"):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if value is None and "None" in t:
            return None
        if t.startswith("int"):
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if t.startswith("float"):
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if t.startswith("str"):
            return str(value)
    except (TypeError, ValueError):
        pass
    else:
        return value
    raise ConfigError(f"config key {key!r}: bad value {value!r} (expected {t})")


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    try:
        if p.suffix.lower() == ".json":
            doc = json.loads(raw)
        else:
            doc = tomllib.loads(raw.decode("utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from None
    if not isinstance(doc, Mapping):
        raise ConfigError(f"config {p} must hold a table/object at top level")
    return ExperimentConfig.from_mapping(doc)
