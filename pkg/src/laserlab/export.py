"""CSV and JSON writers with a provenance header."""

import datetime
import json
import platform
import subprocess
from pathlib import Path

import numpy as np
import scipy

from . import __version__


def _git_hash():
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 else "unknown"


def run_metadata(command, params=None, seed=None, extra=None):
    meta = {
        "command": command,
        "laserlab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "git": _git_hash(),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    if params is not None:
        meta["params"] = params.to_dict()
        meta["derived"] = params.derived_dict()
    if seed is not None:
        meta["seed"] = seed
    if extra:
        meta.update(extra)
    return meta


def fmt(x):
    """Full double precision (17 significant digits)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(fh, columns, rows, metadata=None):
    """Write ``# key: json`` metadata lines, a header row, then data rows."""
    for key, value in (metadata or {}).items():
        fh.write(f"# {key}: {json.dumps(value, sort_keys=True, default=_jsonable)}\n")
    fh.write(",".join(columns) + "\n")
    for row in rows:
        fh.write(",".join(fmt(x) for x in row) + "\n")


def read_csv(path):
    """Read a file written by :func:`write_csv`; returns (metadata, columns, array)."""
    meta = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][2:].partition(": ")
        meta[key] = json.loads(value)
        i += 1
    columns = lines[i].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[i + 1:] if ln],
                    dtype=float).reshape(-1, len(columns))
    return meta, columns, data


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_json(fh, payload):
    json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
    fh.write("\n")
