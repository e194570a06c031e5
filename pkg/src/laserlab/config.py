"""Run-configuration schema and loading for the ``laserlab`` CLI.

A configuration is one JSON object. ``params`` is required; every other
block is optional and only read by the command of the same name. Unknown
keys are rejected at every level.
"""

import json
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .model import params_from_mapping

_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}

_grid = {
    "type": "object",
    "additionalProperties": False,
    "required": ["start", "stop", "num"],
    "properties": {
        "start": {"type": "number"},
        "stop": {"type": "number"},
        "num": _posint,
        "log": {"type": "boolean"},
    },
}


def _values_or_grid(item):
    return {"oneOf": [{"type": "array", "items": item, "minItems": 1}, _grid]}


SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["params"],
    "properties": {
        "params": {
            "type": "object",
            "additionalProperties": False,
            "required": ["g", "kappa", "pump_rate", "n_atoms"],
            "properties": {"g": _pos, "kappa": _pos, "pump_rate": _pos,
                           "n_atoms": _posint},
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "threshold_tol": _nonneg,
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["eta"],
            "properties": {"eta": _values_or_grid(_pos)},
        },
        "dynamics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_end": _pos,
                "dt": _pos,
                "sample_every": _posint,
                "init": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "na": _nonneg, "nb": _nonneg, "nc": _nonneg,
                        "mdm": _nonneg, "madma": _nonneg,
                        "b": {"type": "array", "items": {"type": "number"},
                              "minItems": 2, "maxItems": 2},
                    },
                },
            },
        },
        "gillespie": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_end"],
            "properties": {"t_end": _pos, "burn_in": _nonneg,
                           "sample_stride": _pos, "n_batches": _posint},
        },
        "langevin": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n_traj", "t_end"],
            "properties": {"n_traj": _posint, "t_end": _pos, "dt": _pos,
                           "burn_in": _nonneg, "sample_every": _posint},
        },
        "correlate": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n_traj", "tau"],
            "properties": {"n_traj": _posint, "t_anchor": _pos, "dt": _pos,
                           "tau": _values_or_grid(_nonneg),
                           "n_anchors": _posint},
        },
        "band": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lambda"],
            "properties": {"lambda": _values_or_grid(_nonneg),
                           "abs_tol": _pos},
        },
        "spectrum": {
            "type": "object",
            "additionalProperties": False,
            "required": ["omega_max", "num"],
            "properties": {"omega_max": _pos, "num": _posint,
                           "quadrature": {"enum": ["minus", "plus"]}},
        },
    },
}


def validate(data):
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    return data


def load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    return validate(data)


def params_of(config):
    return params_from_mapping(config["params"])


def expand(grid):
    """Turn a value list or ``{start, stop, num, log}`` block into floats."""
    if isinstance(grid, list):
        return [float(x) for x in grid]
    if grid.get("log"):
        if grid["start"] <= 0 or grid["stop"] <= 0:
            raise ConfigError("log grid bounds must be > 0")
        return np.geomspace(grid["start"], grid["stop"], grid["num"]).tolist()
    return np.linspace(grid["start"], grid["stop"], grid["num"]).tolist()
