"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from .samplers import SAMPLERS, ChainConfig, InitSpec
from .targets import target_from_name


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    target: str = "quartic"
    dim: int = 1
    sampler: str = "tklmc1"
    gamma: float = 60.0
    lam: float = 2.0**-7
    beta: float = 5.0
    n_steps: int = 1200 * 2**7
    burn_in: int = 0
    seed: int = 0
    strict: bool = False
    untamed: bool = False
    epsilon: float | None = None
    K: float | None = None
    n_chains: int = 1
    thin: int = 1
    init: InitSpec = field(default_factory=InitSpec)
    w2: bool = True
    moments: tuple[int, ...] = (2,)
    excess_risk: bool = True
    decay_fit: bool = False
    trajectory: bool = False
    histogram: bool = False
    output_dir: str = "out"
    jobs: int = 1

    def chain_config(self) -> ChainConfig:
        return ChainConfig(
            lam=self.lam, gamma=self.gamma, beta=self.beta, n_steps=self.n_steps,
            burn_in=self.burn_in, seed=self.seed, strict_params=self.strict,
            epsilon=self.epsilon, K=self.K, tamed=not self.untamed,
        )


# file key -> dataclass attribute
_KEYS = {f.name: f.name for f in dataclasses.fields(ExperimentSpec)}
del _KEYS["lam"]
_KEYS["lambda"] = "lam"
_ATTR_TO_KEY = {v: k for k, v in _KEYS.items()}

_INT = {"dim", "n_steps", "burn_in", "seed", "n_chains", "thin", "jobs"}
_FLOAT = {"gamma", "lam", "beta"}
_OPT_FLOAT = {"epsilon", "K"}
_BOOL = {"strict", "untamed", "w2", "excess_risk", "decay_fit", "trajectory", "histogram"}
_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _convert(attr: str, raw: str):
    raw = raw.strip()
    try:
        if attr in _INT:
            return int(raw)
        if attr in _FLOAT:
            return float(raw)
        if attr in _OPT_FLOAT:
            return None if raw.lower() in ("", "none") else float(raw)
        if attr in _BOOL:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if attr == "moments":
            return tuple(int(s) for s in raw.split(",") if s.strip())
        if attr == "init":
            return InitSpec.parse(raw)
    except ValueError as exc:
        raise ConfigError(f"{_ATTR_TO_KEY[attr]}: {exc}") from exc
    return raw


def _check(spec: ExperimentSpec) -> ExperimentSpec:
    try:
        spec.chain_config()
        target_from_name(spec.target, spec.dim)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if spec.sampler not in SAMPLERS:
        raise ConfigError(f"sampler must be one of {SAMPLERS}, got {spec.sampler!r}")
    if spec.n_chains < 1 or spec.thin < 1 or spec.jobs < 1:
        raise ConfigError("n_chains, thin and jobs must be >= 1")
    if any(p < 2 or p % 2 for p in spec.moments):
        raise ConfigError(f"moment orders must be even integers >= 2, got {spec.moments}")
    if not spec.output_dir:
        raise ConfigError("output_dir must be nonempty")
    for name in ("gamma", "lam", "beta"):
        if not math.isfinite(getattr(spec, name)):
            raise ConfigError(f"{name} must be finite")
    return spec


def parse_config(text: str = "", overrides: dict | None = None) -> ExperimentSpec:
    """Parse ``key = value`` lines (``#`` starts a comment); ``overrides`` win.

    Override keys may be file keys or attribute names, values raw strings or
    already-typed values.
    """
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[_KEYS[key]] = _convert(_KEYS[key], raw)
    for key, value in (overrides or {}).items():
        attr = _KEYS.get(key, key if key in _ATTR_TO_KEY else None)
        if attr is None:
            raise ConfigError(f"unknown override {key!r}")
        values[attr] = _convert(attr, value) if isinstance(value, str) else value
    return _check(ExperimentSpec(**values))


def render_config(spec: ExperimentSpec) -> str:
    lines = []
    for f in dataclasses.fields(spec):
        value = getattr(spec, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        elif value is None:
            text = "none"
        elif isinstance(value, InitSpec):
            text = value.render()
        elif isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        else:
            text = str(value)
        lines.append(f"{_ATTR_TO_KEY[f.name]} = {text}")
    return "\n".join(lines) + "\n"
