"""Run configuration: YAML file, dotted overrides, schema validation.

A config has four required sections plus an optional ``analysis`` block::

    map:       {family: exp, params: [0.3]}
    potential: {t: 1.25, tau: auto, h: zero}
    solver:    {depth: null, window: 2001, bases: 3, tolerances: {...},
                mode: deterministic, seed: 0, engine: auto}
    output:    {format: csv, path: null}
    analysis:  {q_grid: ..., param_grid: ..., kmax: 20, psi: ...}

Every leaf can be overridden from the command line with ``--set a.b=value``
(values are parsed as YAML scalars).
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import jsonschema
import yaml

from .errors import ThermoformError

DEFAULTS = {
    "map": {"family": "power", "params": [2]},
    "potential": {"t": 1.0, "tau": "auto", "h": "zero"},
    "solver": {
        "depth": None,
        "window": 2001,
        "bases": 3,
        "tolerances": {"pressure": 5e-4, "bowen": 1e-6, "root": 1e-12, "density": 0.05},
        "mode": "deterministic",
        "seed": 0,
        "engine": "auto",
    },
    "output": {"format": "csv", "path": None},
    "analysis": {
        "q_grid": {"start": -1.0, "stop": 1.0, "num": 21},
        "param_grid": None,
        "what": "bowen",
        "kmax": 20,
        "psi": {"kind": "re_z_clamped", "bound": 2.0},
        "tau_position": 0.75,
    },
}

_number = {"type": "number"}
_grid = {
    "oneOf": [
        {"type": "array", "items": _number, "minItems": 1},
        {
            "type": "object",
            "properties": {"start": _number, "stop": _number, "num": {"type": "integer", "minimum": 1},
                           "step": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["start", "stop"],
            "additionalProperties": False,
        },
    ]
}
_observable = {
    "oneOf": [
        {"enum": ["zero"]},
        _number,
        {
            "type": "object",
            "properties": {
                "kind": {"enum": ["zero", "const", "re_z_clamped", "table"]},
                "c": _number,
                "bound": {"type": "number", "exclusiveMinimum": 0},
                "x": {"type": "array", "items": _number},
                "y": {"type": "array", "items": _number},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["map", "potential", "solver", "output"],
    "additionalProperties": False,
    "properties": {
        "map": {
            "type": "object",
            "required": ["family"],
            "additionalProperties": False,
            "properties": {
                "family": {"type": "string"},
                "params": {"type": "array", "items": _number},
            },
        },
        "potential": {
            "type": "object",
            "required": ["t"],
            "additionalProperties": False,
            "properties": {
                "t": _number,
                "tau": {"oneOf": [{"const": "auto"}, {"type": "number", "minimum": 0}]},
                "h": _observable,
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "depth": {"type": ["integer", "null"], "minimum": 1},
                "window": {"type": "integer", "minimum": 1},
                "bases": {"type": "integer", "minimum": 1},
                "tolerances": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"pressure": _number, "bowen": _number, "root": _number, "density": _number},
                },
                "mode": {"enum": ["deterministic", "fast"]},
                "seed": {"type": ["integer", "null"]},
                "engine": {"enum": ["auto", "tree", "collocation"]},
            },
            "if": {"properties": {"mode": {"const": "deterministic"}}},
            "then": {"properties": {"seed": {"type": "integer"}}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "format": {"enum": ["csv", "json"]},
                "path": {"type": ["string", "null"]},
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "q_grid": _grid,
                "param_grid": {"oneOf": [{"type": "null"}, _grid]},
                "what": {"enum": ["bowen", "spectrum"]},
                "kmax": {"type": "integer", "minimum": 1},
                "psi": _observable,
                "tau_position": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
    },
}


class ConfigError(ThermoformError):
    """Invalid configuration; ``path`` is the dotted location of the problem."""

    def __init__(self, message, path=""):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "h" and k != "psi":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_override(cfg, assignment):
    """Apply ``a.b.c=value`` (value parsed as YAML) in place."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value", assignment)
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    try:
        node[parts[-1]] = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value: {exc}", key) from exc
    return cfg


def validate(cfg):
    v = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        path = ".".join(str(p) for p in e.absolute_path)
        raise ConfigError(e.message, path)
    return cfg


@dataclass
class RunConfig:
    map: dict
    potential: dict
    solver: dict
    output: dict
    analysis: dict

    @classmethod
    def from_dict(cls, raw, overrides=()):
        """Defaults, then ``raw``, then overrides; validated."""
        if raw is not None and not isinstance(raw, dict):
            raise ConfigError("top level must be a mapping")
        cfg = _merge(DEFAULTS, raw or {})
        if raw and "map" in raw and "params" not in raw["map"]:
            cfg["map"]["params"] = []
        for o in overrides:
            apply_override(cfg, o)
        validate(cfg)
        return cls(**{k: cfg[k] for k in ("map", "potential", "solver", "output", "analysis")})

    @classmethod
    def load(cls, path, overrides=()):
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from exc
        return cls.from_dict(raw, overrides)

    def as_dict(self):
        return {"map": self.map, "potential": self.potential, "solver": self.solver, "output": self.output,
                "analysis": self.analysis}

    def canonical(self):
        return json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))

    def sha256(self):
        return config_hash(self.as_dict())

    @property
    def deterministic(self):
        return self.solver["mode"] == "deterministic"


def config_hash(cfg: dict):
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def expand_grid(spec):
    """Explicit list, ``{start, stop, num}`` (inclusive) or ``{start, stop, step}``."""
    import numpy as np

    if spec is None:
        return None
    if isinstance(spec, list):
        return [float(x) for x in spec]
    start, stop = float(spec["start"]), float(spec["stop"])
    if "step" in spec:
        n = int(round((stop - start) / spec["step"])) + 1
        return [float(x) for x in np.round(start + spec["step"] * np.arange(n), 12)]
    return [float(x) for x in np.round(np.linspace(start, stop, int(spec.get("num", 11))), 12)]
