"""Run configuration schema, result records and CSV/JSON persistence."""
from __future__ import annotations

import copy
import csv
import io as _io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

__all__ = [
    "COMMANDS",
    "CONFIG_SCHEMA",
    "RECORD_SCHEMA",
    "MAX_DUMP_ROWS",
    "ConfigError",
    "ResultRecord",
    "validate_config",
    "load_config",
    "to_jsonable",
    "dump_json",
    "write_json_atomic",
    "format_float",
    "write_csv",
    "grid_dump_rows",
    "write_grid_csv",
    "read_record",
]

COMMANDS = ("solve-sg", "solve-tba", "solve-hubbard", "oracle-rsos", "oracle-ybe", "sweep")
MAX_DUMP_ROWS = 2**14

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_half = {"type": "number", "multipleOf": 0.5}
_pair = {"type": "array", "items": _half, "minItems": 2, "maxItems": 2}

_ITERATION = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "tol_function": _pos,
        "tol_sources": _pos,
        "max_iter": {"type": "integer", "minimum": 1},
        "auto_damping": {"type": "boolean"},
    },
}

_SG = {
    "type": "object",
    "additionalProperties": False,
    "required": ["p", "l"],
    "properties": {
        "p": _pos,
        "l": _pos,
        "eta": _pos,
        "n_points": {"type": "integer", "minimum": 64},
        "holes": {"type": "array", "items": _half},
        "specials": {"type": "array", "items": _num},
        "close_pairs": {"type": "array", "items": _pair},
        "wide_pairs": {"type": "array", "items": _pair},
        "self_conjugate": {"type": "array", "items": _half},
        "delta": {"enum": [0, 1]},
        "spin": {"type": "number", "minimum": 0, "multipleOf": 0.5},
    },
}

_TBA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["L"],
    "properties": {
        "L": {"type": "integer", "minimum": 3},
        "m": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "I": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
        "boundary_xi": {"type": ["number", "null"]},
        "x_min": _num,
        "x_max": _num,
        "n_points": {"type": "integer", "minimum": 64},
        "integrals": {"type": "integer", "minimum": 0, "maximum": 6},
    },
}

_HUBBARD = {
    "type": "object",
    "additionalProperties": False,
    "required": ["L", "U"],
    "properties": {
        "L": {"type": "integer", "minimum": 4, "multipleOf": 4},
        "t": _pos,
        "U": _pos,
        "phi": _num,
        "n_u": {"type": "integer", "minimum": 64},
        "n_k": {"type": "integer", "minimum": 64},
        "oracle": {"type": "boolean"},
        "surrogate": {"type": "boolean"},
    },
}

_RSOS = {
    "type": "object",
    "additionalProperties": False,
    "required": ["L", "N"],
    "properties": {
        "L": {"type": "integer", "minimum": 3},
        "N": {"type": "integer", "minimum": 2, "multipleOf": 2},
        "zeros": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0},
    },
}

_YBE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["spec"],
    "properties": {
        "spec": {"enum": ["gl2", "gl11", "gl22", "hubbard"]},
        "points": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "U": _pos,
    },
}

_SWEEP = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command", "axis", "values"],
    "properties": {
        "command": {"enum": ["solve-sg", "solve-tba", "solve-hubbard"]},
        "axis": {"type": "string", "minLength": 1},
        "values": {"type": "array", "items": _num},
    },
}

_OUTPUT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "grids": {"type": "boolean"},
        "plots": {"type": "boolean"},
    },
}

CONFIG_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "iteration": _ITERATION,
        "sg": _SG,
        "tba": _TBA,
        "hubbard": _HUBBARD,
        "rsos": _RSOS,
        "ybe": _YBE,
        "sweep": _SWEEP,
        "output": _OUTPUT,
    },
}

RECORD_SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command", "input", "result", "version", "wall_time"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "input": CONFIG_SCHEMA,
        "result": {"type": "object"},
        "version": {"type": "string"},
        "wall_time": {"type": "number", "minimum": 0},
        "timestamp": {"type": "string"},
    },
}

_BLOCK_FOR = {
    "solve-sg": "sg",
    "solve-tba": "tba",
    "solve-hubbard": "hubbard",
    "oracle-rsos": "rsos",
    "oracle-ybe": "ybe",
    "sweep": "sweep",
}


class ConfigError(ValueError):
    """Schema or invariant violation; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _path_str(err: jsonschema.ValidationError) -> str:
    parts = []
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else ("." if parts else "") + str(p))
    return "".join(parts) or "<root>"


def _describe(err: jsonschema.ValidationError) -> str:
    name = str(err.absolute_path[-1]) if err.absolute_path else "config"
    if err.validator == "minimum":
        return f"{name} must be >= {err.validator_value} (got {err.instance})"
    if err.validator == "exclusiveMinimum":
        return f"{name} must be > {err.validator_value} (got {err.instance})"
    if err.validator == "additionalProperties":
        return f"unknown key(s): {err.message}"
    return err.message


def validate_config(config: dict, command: str | None = None) -> dict:
    """Validate against the schema and return a copy with ``command`` filled in."""
    if not isinstance(config, dict):
        raise ConfigError("configuration must be a JSON object")
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(_describe(e), _path_str(e))
    cfg = copy.deepcopy(config)
    if command is not None:
        if "command" in cfg and cfg["command"] != command:
            raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}", "command")
        cfg["command"] = command
    if "command" not in cfg:
        raise ConfigError("no command given", "command")
    block = _BLOCK_FOR[cfg["command"]]
    if cfg["command"] == "sweep":
        if "sweep" not in cfg:
            raise ConfigError("missing block", "sweep")
        if not cfg["sweep"]["values"]:
            raise ConfigError("values must not be empty", "sweep.values")
        block = _BLOCK_FOR[cfg["sweep"]["command"]]
    if block not in cfg:
        raise ConfigError("missing block", block)
    return cfg


def load_config(path: str | os.PathLike, command: str | None = None) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return validate_config(raw, command)


def to_jsonable(obj: Any):
    """Recursively convert numpy values, tuples and complex numbers."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(obj.real)), "im": to_jsonable(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan; keep them as strings so records stay loadable
        return v if math.isfinite(v) else repr(v)
    return obj


def dump_json(obj: Any) -> str:
    # float repr is the shortest string that round-trips, at most 17 digits
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json_atomic(path: str | os.PathLike, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(dump_json(obj))
    os.replace(tmp, path)
    return path


def format_float(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def write_csv(path: str | os.PathLike | None, header, rows) -> str:
    """Write a CSV with a header row and 17-significant-digit floats.

    Returns the text; writes it atomically when ``path`` is given.
    """
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".csv")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    return text


def grid_dump_rows(x, f, max_rows: int = MAX_DUMP_ROWS):
    """Rows (x, Re f, Im f), strided down to at most ``max_rows``."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f)
    if x.shape != f.shape:
        raise ValueError("x and f must have the same shape")
    stride = max(1, math.ceil(x.size / max_rows))
    idx = np.arange(0, x.size, stride)
    return [(float(x[i]), float(np.real(f[i])), float(np.imag(f[i]))) for i in idx]


def write_grid_csv(path, x, f, max_rows: int = MAX_DUMP_ROWS) -> Path:
    write_csv(path, ["x", "re", "im"], grid_dump_rows(x, f, max_rows))
    return Path(path)


@dataclass
class ResultRecord:
    command: str
    input: dict
    result: dict
    version: str
    wall_time: float
    timestamp: str | None = None
    files: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {
            "command": self.command,
            "input": to_jsonable(self.input),
            "result": to_jsonable(self.result),
            "version": self.version,
            "wall_time": float(self.wall_time),
        }
        if self.timestamp is not None:
            d["timestamp"] = self.timestamp
        return d

    def to_json(self) -> str:
        return dump_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(RECORD_SCHEMA).iter_errors(d))
        if err is not None:
            raise ConfigError(_describe(err), _path_str(err))
        validate_config(d["input"])
        return cls(d["command"], d["input"], d["result"], d["version"], d["wall_time"], d.get("timestamp"))

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        return cls.from_dict(json.loads(text))


def read_record(path: str | os.PathLike) -> ResultRecord:
    with open(path, encoding="utf-8") as fh:
        return ResultRecord.from_json(fh.read())
