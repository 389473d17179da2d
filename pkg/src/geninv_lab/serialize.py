"""JSON and CSV encodings shared by the CLI and reports."""
import csv
import io
import json
import math

import numpy as np

from .exceptions import ParseError
from .subspace import Subspace

__all__ = [
    "matrix_to_json",
    "matrix_from_json",
    "subspace_to_json",
    "subspace_from_json",
    "to_jsonable",
    "dumps",
    "csv_table",
]


def matrix_to_json(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]), "data": [float(v) for v in a.reshape(-1)]}


def matrix_from_json(obj, field="matrix"):
    """Decode ``{"rows", "cols", "data"}``; ParseError names ``field`` on failure."""
    if not isinstance(obj, dict):
        raise ParseError(f"{field}: expected an object with rows, cols, data")
    for key in ("rows", "cols", "data"):
        if key not in obj:
            raise ParseError(f"{field}: missing key {key!r}")
    rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    if not (isinstance(rows, int) and isinstance(cols, int) and rows > 0 and cols > 0):
        raise ParseError(f"{field}: rows and cols must be positive integers")
    if not isinstance(data, list) or len(data) != rows * cols:
        raise ParseError(f"{field}: data must hold rows*cols = {rows * cols} numbers")
    try:
        arr = np.array(data, dtype=np.float64).reshape(rows, cols)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{field}: non-numeric entry in data") from exc
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{field}: entries must be finite")
    return arr


def subspace_to_json(s):
    return {"ambient_dim": s.ambient_dim, "basis": matrix_to_json(s.basis) if s.dim else None}


def subspace_from_json(obj, field="subspace"):
    if not isinstance(obj, dict) or "ambient_dim" not in obj:
        raise ParseError(f"{field}: expected an object with ambient_dim and basis")
    n = obj["ambient_dim"]
    if not isinstance(n, int) or n < 1:
        raise ParseError(f"{field}: ambient_dim must be a positive integer")
    if obj.get("basis") is None:
        return Subspace.zero(n)
    basis = matrix_from_json(obj["basis"], f"{field}.basis")
    if basis.shape[0] != n:
        raise ParseError(f"{field}: basis has {basis.shape[0]} rows, expected {n}")
    return Subspace(basis, ambient_dim=n)


def to_jsonable(obj):
    """Recursively convert numpy values; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj):
    """Deterministic JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def csv_table(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
