"""Experiment configuration: strict key=value parsing and canonical echo.

Configs are flat UTF-8 ``key = value`` lines ('#' comments allowed).
Parsing is strict: unknown keys are rejected, and validation reports the
complete list of violations, not just the first.  ``emit_config``
produces the canonical text form that round-trips through
``parse_config`` unchanged; every run echoes it into its outputs for
provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "emit_config", "validate_config"]

EXPERIMENTS = (
    "evl-curve",
    "hts",
    "rts",
    "kac",
    "epp-poisson",
    "htpp-poisson",
    "duality-check",
    "dprime",
    "d3",
    "mixing",
    "expansivity",
)

SYSTEMS = ("doubling", "quadratic", "torus-doubling", "perturbed-expanding", "intermittent")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment description; every numeric field is validated."""

    experiment: str
    system: str
    seed: int
    zeta: tuple = None
    observable: str = "g1"
    alpha: float = None
    obs_max: float = None
    a: float = None
    gamma: float = None
    epsilon: float = None
    bump_center: float = None
    bump_radius: float = None
    contraction_delta: float = None
    delta: float = None
    n: int = None
    m: int = None
    burn_in: int = 1000
    cap: int = None
    budget: int = None
    horizon: float = None
    lags: int = None
    k_values: tuple = None
    t_shift: int = None
    block_len: int = None
    k_cap: int = 4
    l_cap: int = 4
    lam: float = None
    y: float = None
    y_grid: tuple = None
    t_grid: tuple = None
    tol: float = None
    streams: int = 64
    out: str = None


_POSITIVE_INT = ("seed", "n", "m", "cap", "budget", "lags", "t_shift", "block_len", "k_cap", "l_cap", "streams")
_POSITIVE_FLOAT = ("alpha", "delta", "horizon", "lam", "tol")
_ANY_FLOAT = ("obs_max", "a", "gamma", "epsilon", "bump_center", "bump_radius", "contraction_delta", "y")
_GRIDS = ("y_grid", "t_grid", "k_values", "zeta")
_STRINGS = ("experiment", "system", "observable", "out")
_NONNEG_INT = ("seed", "t_shift", "burn_in")

_REQUIRED = {
    "kac": ("zeta", "delta", "m"),
    "hts": ("zeta", "delta", "m", "t_grid"),
    "rts": ("zeta", "delta", "m", "t_grid"),
    "evl-curve": ("zeta", "n", "m", "y_grid"),
    "epp-poisson": ("zeta", "n", "m", "horizon"),
    "htpp-poisson": ("zeta", "delta", "m", "horizon"),
    "duality-check": ("m", "n"),
    "dprime": ("zeta", "n", "budget", "k_values"),
    "d3": ("zeta", "n", "m", "t_shift", "block_len"),
    "mixing": ("zeta", "delta", "n", "budget"),
    "expansivity": ("m", "n", "lam"),
}


def _parse_grid(text: str):
    text = text.strip()
    if ":" in text:
        lo, hi, count = text.split(":")
        return tuple(float(v) for v in np.linspace(float(lo), float(hi), int(count)))
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _format_value(name: str, value) -> str:
    if name in _GRIDS:
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; raises :class:`ConfigError` listing all problems."""
    known = {f.name for f in fields(ExperimentConfig)}
    raw: dict = {}
    problems: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            problems.append(f"line {lineno}: expected key = value")
            continue
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in known:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in raw:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        raw[key] = (lineno, value)

    values: dict = {}
    for key, (lineno, value) in raw.items():
        try:
            if key in _GRIDS:
                values[key] = _parse_grid(value)
            elif key in _POSITIVE_INT or key in _NONNEG_INT:
                values[key] = int(value)
            elif key in _POSITIVE_FLOAT or key in _ANY_FLOAT:
                values[key] = float(value)
            else:
                values[key] = value
        except ValueError:
            problems.append(f"line {lineno}: cannot parse {key} = {value!r}")

    for key in ("experiment", "system", "seed"):
        if key not in values:
            problems.append(f"missing required key {key!r}")
    if problems:
        raise ConfigError(problems)
    cfg = ExperimentConfig(**values)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """All schema violations of a config, empty when valid."""
    p: list[str] = []
    if cfg.experiment not in EXPERIMENTS:
        p.append(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    if cfg.system not in SYSTEMS:
        p.append(f"system must be one of {', '.join(SYSTEMS)}")
    if cfg.observable not in ("g1", "g2", "g3"):
        p.append("observable must be g1, g2 or g3")
    for name in _POSITIVE_INT:
        v = getattr(cfg, name)
        if v is not None and name not in _NONNEG_INT and v < 1:
            p.append(f"{name} must be positive")
    for name in _NONNEG_INT:
        v = getattr(cfg, name)
        if v is not None and v < 0:
            p.append(f"{name} must be non-negative")
    for name in _POSITIVE_FLOAT:
        v = getattr(cfg, name)
        if v is not None and not v > 0:
            p.append(f"{name} must be positive")
    if cfg.observable in ("g2", "g3") and cfg.alpha is None:
        p.append(f"{cfg.observable} needs alpha")
    if cfg.observable != "g3" and cfg.obs_max is not None:
        p.append("obs_max is g3-only")
    if cfg.observable == "g3" and cfg.obs_max is None:
        p.append("g3 needs obs_max")
    if cfg.observable == "g1" and cfg.alpha is not None:
        p.append("alpha is g2/g3-only")
    if cfg.system != "quadratic" and cfg.a is not None:
        p.append("a is quadratic-only")
    if cfg.system != "intermittent" and cfg.gamma is not None:
        p.append("gamma is intermittent-only")
    if cfg.system != "perturbed-expanding":
        for name in ("epsilon", "bump_center", "bump_radius", "contraction_delta"):
            if getattr(cfg, name) is not None:
                p.append(f"{name} is perturbed-expanding-only")
    if cfg.zeta is not None:
        want = 2 if cfg.system == "torus-doubling" else 1
        if len(cfg.zeta) != want:
            p.append(f"zeta needs {want} component(s) for {cfg.system}")
    if cfg.experiment in _REQUIRED:
        for key in _REQUIRED[cfg.experiment]:
            if getattr(cfg, key) is None:
                p.append(f"{cfg.experiment} requires {key}")
    if cfg.k_values is not None and any(v < 1 or v != int(v) for v in cfg.k_values):
        p.append("k_values must be positive integers")
    return p


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(emit_config(c)) == c``."""
    lines = []
    for f in fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        lines.append(f"{f.name} = {_format_value(f.name, v)}")
    return "\n".join(lines) + "\n"
