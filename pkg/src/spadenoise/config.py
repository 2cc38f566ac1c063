"""Flat ``key = value`` experiment configs.

Grid values are comma lists (``0, 0.01, 0.1``) or inclusive ranges
``start:stop:step``. Lines starting with ``#`` are comments. Command-line
overrides are applied on top with :meth:`ExperimentConfig.updated`.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

COMMANDS = ("fisher-sweep", "decoupled-fisher-sweep", "prob-check", "protocol-sim", "group-check")
STOCHASTIC = ("prob-check", "protocol-sim")


class ConfigError(ValueError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


def _parse_float(token, key, line):
    token = token.strip()
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"not a number: {token!r}", key, line) from None


def parse_grid(text, key=None, line=None, integer=False):
    text = text.strip()
    if not text:
        raise ConfigError("empty grid", key, line)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("ranges are written start:stop:step", key, line)
        start, stop, step = (_parse_float(p, key, line) for p in parts)
        if not step > 0 or stop < start:
            raise ConfigError("range needs step > 0 and stop >= start", key, line)
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + k * step, 12) for k in range(count)]
    else:
        values = [_parse_float(tok, key, line) for tok in text.split(",")]
    if integer:
        if any(v != int(v) for v in values):
            raise ConfigError("expected integers", key, line)
        values = [int(v) for v in values]
    return values


# key -> (attribute, kind)
_FIELDS = {
    "command": ("command", "str"),
    "d": ("d", "grid"),
    "sigma_tilde": ("sigma_tilde", "grid"),
    "epsilon": ("epsilon", "grid"),
    "lambda": ("lam", "grid"),
    "m": ("m", "igrid"),
    "N": ("N", "igrid"),
    "n": ("n", "igrid"),
    "seeds": ("seeds", "igrid"),
    "dim": ("dim", "int"),
    "seed": ("seed", "int"),
    "samples": ("samples", "int"),
    "degree": ("degree", "int"),
    "workers": ("workers", "int"),
    "noise_mode": ("noise_mode", "str"),
    "out": ("out", "str"),
    "format": ("format", "str"),
}


@dataclass
class ExperimentConfig:
    command: str | None = None
    d: list | None = None
    sigma_tilde: list | None = None
    epsilon: list | None = None
    lam: list | None = None
    m: list | None = None
    N: list | None = None
    n: list | None = None
    seeds: list | None = None
    dim: int = 64
    seed: int | None = None
    samples: int | None = None
    degree: int | None = None
    workers: int = 1
    noise_mode: str | None = None
    out: str | None = None
    format: str = "csv"

    def updated(self, **overrides):
        clean = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **clean)

    def to_dict(self):
        out = {}
        for key, (attr, _) in _FIELDS.items():
            value = getattr(self, attr)
            if value is not None:
                out[key] = value
        return out


def _coerce(key, kind, raw, line):
    if kind == "str":
        return raw.strip()
    if kind == "int":
        value = _parse_float(raw, key, line)
        if value != int(value):
            raise ConfigError("expected an integer", key, line)
        return int(value)
    return parse_grid(raw, key, line, integer=(kind == "igrid"))


def parse_config(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError("expected key = value", line=lineno)
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError("unknown key", key, lineno)
        attr, kind = _FIELDS[key]
        values[attr] = _coerce(key, kind, value, lineno)
    cfg = ExperimentConfig(**values)
    if cfg.command is not None and cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}", "command")
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _format_value(value):
    if isinstance(value, list):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: ExperimentConfig):
    """Canonical text form: one key per line in a fixed order."""
    return "".join(f"{key} = {_format_value(value)}\n" for key, value in cfg.to_dict().items())


def validate(cfg: ExperimentConfig):
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}", "command")
    if cfg.dim < 2:
        raise ConfigError("dim must be >= 2", "dim")
    if cfg.command in STOCHASTIC and cfg.seed is None:
        raise ConfigError("a seed is required for stochastic commands", "seed")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format must be csv or json", "format")
    for key, (attr, kind) in _FIELDS.items():
        value = getattr(cfg, attr)
        if kind in ("grid", "igrid") and value is not None and len(value) == 0:
            raise ConfigError("empty grid", key)
    for key in ("d", "sigma_tilde", "lambda"):
        value = getattr(cfg, _FIELDS[key][0])
        if value is not None and any(v < 0 for v in value):
            raise ConfigError("values must be >= 0", key)
    if cfg.epsilon is not None and any(not 0 < e <= 1 for e in cfg.epsilon):
        raise ConfigError("epsilon must lie in (0, 1]", "epsilon")
    if cfg.n is not None and cfg.n and 2 * max(cfg.n) > cfg.dim:
        raise ConfigError("dim must be >= 2 * max outcome index", "dim")
    return cfg
