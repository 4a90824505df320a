"""
Run configuration: a flat sectioned ``key = value`` text format.

    [scheme]
    scheme = "mlf"
    nu = 0.5
    D = 0.8

    [shock]
    u_minus = 1
    u_plus = -1

Values are Python literals (numbers, quoted strings, lists); bare words are
read as strings.  Unknown sections or keys, type mismatches and range
violations are reported with their line number.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .profile import DEFAULT_DELTA_GRID, DEFAULT_HALF_WIDTH, DEFAULT_MAX_STEPS, DEFAULT_TOL
from .stability import RANDOM_SEED


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


# key -> (type, default, check, description of the check); default REQUIRED means mandatory
REQUIRED = object()
SCHEMA = {
    "scheme": {
        "scheme": (str, "mlf", lambda v: v == "mlf", "must be 'mlf'"),
        "nu": (float, REQUIRED, _pos, "must be > 0"),
        "D": (float, REQUIRED, _pos, "must be > 0"),
        "flux": (str, "burgers", lambda v: v == "burgers", "must be 'burgers'"),
        "state_lo": (float, -1.5, None, ""),
        "state_hi": (float, 1.5, None, ""),
    },
    "shock": {
        "u_minus": (float, REQUIRED, None, ""),
        "u_plus": (float, REQUIRED, None, ""),
    },
    "profile": {
        "half_width": (int, DEFAULT_HALF_WIDTH, lambda v: v >= 8, "must be >= 8"),
        "tol": (float, DEFAULT_TOL, _pos, "must be > 0"),
        "max_steps": (int, DEFAULT_MAX_STEPS, _pos, "must be > 0"),
        "delta_grid": (list, [float(d) for d in DEFAULT_DELTA_GRID], lambda v: len(v) >= 3, "needs >= 3 values"),
    },
    "experiment": {
        "choice": (int, 1, lambda v: v in (1, 2), "must be 1 or 2"),
        "p": (float, 1.0, _pos, "must be > 0"),
        "j_max": (int, 50, lambda v: v >= 2, "must be >= 2"),
        "n_max": (int, 2000, lambda v: v >= 20, "must be >= 20"),
        "seed": (int, RANDOM_SEED, _nonneg, "must be >= 0"),
    },
    "output": {
        "out_dir": (str, "dspstab_out", lambda v: bool(v), "must be non-empty"),
        "formats": (list, ["csv", "svg", "txt"],
                    lambda v: set(v) <= {"csv", "svg", "txt"}, "allowed: csv, svg, txt"),
    },
}


@dataclass
class RunConfig:
    scheme: dict = field(default_factory=dict)
    shock: dict = field(default_factory=dict)
    profile: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @property
    def out_dir(self) -> str:
        return self.output["out_dir"]

    def to_text(self) -> str:
        """Effective configuration in the input format (round-trips through :func:`parse_config`)."""
        lines = []
        for f in fields(self):
            lines.append(f"[{f.name}]")
            for k, v in getattr(self, f.name).items():
                lines.append(f"{k} = {v!r}")
            lines.append("")
        return "\n".join(lines)


def _coerce(typ, raw: str, value, key: str, line: int):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {raw!r}", line)
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{key}: must be finite", line)
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {raw!r}", line)
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {raw!r}", line)
        return value
    if typ is list:
        if isinstance(value, (int, float)) and key == "delta_grid":
            # a count: that many equispaced points in [-0.5, 0.5]
            if int(value) != value or value < 3:
                raise ConfigError(f"{key}: count must be an integer >= 3", line)
            return [float(x) for x in np.linspace(-0.5, 0.5, int(value))]
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {raw!r}", line)
        if key == "delta_grid":
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
                raise ConfigError(f"{key}: entries must be numbers", line)
            return [float(x) for x in value]
        return [str(x) for x in value]
    raise AssertionError(typ)


def _literal(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw          # bare word


def parse_config(text: str) -> RunConfig:
    """Parse and validate; defaults fill every optional key."""
    seen: dict[str, dict[str, tuple]] = {}
    section = None
    for ln, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", ln)
            seen.setdefault(section, {})
            continue
        if "=" not in s:
            raise ConfigError(f"expected 'key = value', got {s!r}", ln)
        if section is None:
            raise ConfigError("key outside of any [section]", ln)
        key, raw = (t.strip() for t in s.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", ln)
        if key in seen[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", ln)
        typ, _, check, why = SCHEMA[section][key]
        value = _coerce(typ, raw, _literal(raw), key, ln)
        if check is not None and not check(value):
            raise ConfigError(f"{key} = {raw}: {why}", ln)
        seen[section][key] = (value, ln)

    cfg = RunConfig()
    for sec, keys in SCHEMA.items():
        block = {}
        for key, (typ, default, _, _) in keys.items():
            if key in seen.get(sec, {}):
                block[key] = seen[sec][key][0]
            elif default is REQUIRED:
                raise ConfigError(f"missing required key {key!r} in [{sec}]")
            else:
                block[key] = list(default) if isinstance(default, list) else default
        setattr(cfg, sec, block)
    if cfg.scheme["state_lo"] >= cfg.scheme["state_hi"]:
        line = seen.get("scheme", {}).get("state_hi", (None, None))[1]
        raise ConfigError("state_lo must be below state_hi", line)
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
