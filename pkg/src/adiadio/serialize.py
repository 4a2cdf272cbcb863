"""Deterministic JSON and CSV emission.

Every float is rendered with 17 significant digits so round-tripping is
bit-exact and identical runs produce identical bytes.  The stdlib json module
would do repr-shortest floats, which round-trips too, but pinning the digit
count keeps output stable across Python versions and makes files diffable.
"""
from __future__ import annotations

import json
import math

import numpy as np

__all__ = ["format_float", "dumps", "dump", "write_csv"]


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"non-finite float {x!r} in output")
    return format(x, ".17g")


def _normalize(obj):
    """Map numpy scalars/arrays onto plain Python containers."""
    if isinstance(obj, np.ndarray):
        return [_normalize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    return obj


def _emit(obj, out: list[str], indent: int) -> None:
    pad = "  " * indent
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be str, got {key!r}")
            out.append(f"{pad}  {json.dumps(key)}: ")
            _emit(value, out, indent + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, value in enumerate(obj):
            out.append(pad + "  ")
            _emit(value, out, indent + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}: {obj!r}")


def dumps(obj) -> str:
    """Deterministic JSON text: insertion-ordered keys, floats at 17 digits."""
    out: list[str] = []
    _emit(_normalize(obj), out, 0)
    return "".join(out)


def dump(obj, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def _cell(x) -> str:
    if isinstance(x, (np.floating,)):
        x = float(x)
    if isinstance(x, float):
        return format_float(x)
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path: str, header: list[str], rows) -> None:
    """Plain comma-separated output with the same float formatting as JSON."""
    with open(path, "w") as fh:
        fh.write(",".join(header))
        fh.write("\n")
        for row in rows:
            fh.write(",".join(_cell(x) for x in row))
            fh.write("\n")
