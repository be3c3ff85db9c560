"""CSV and JSON readers and writers used by the command line.

Every CSV starts with a header row.  Floats are written with ``repr``, which
is the shortest decimal string that reads back to the same double.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(x) for x in row])


def read_rows(path):
    """Header and data rows of a CSV file, as strings."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV file (a header row is required)")
    return rows[0], [r for r in rows[1:] if r]


def _to_float(text, path, line):
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"{path}: line {line}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"{path}: line {line}: non-finite value {text!r}")
    return v


def write_vector(path, x, name="value") -> None:
    write_rows(path, [name], ([v] for v in np.asarray(x, dtype=float)))


def read_vector(path) -> np.ndarray:
    """Single-column CSV with a header row."""
    header, rows = read_rows(path)
    if len(header) != 1:
        raise ValueError(f"{path}: expected one column, found {len(header)}")
    out = []
    for k, r in enumerate(rows, start=2):
        if len(r) != 1:
            raise ValueError(f"{path}: line {k}: expected one field, found {len(r)}")
        out.append(_to_float(r[0], path, k))
    if not out:
        raise ValueError(f"{path}: no data rows")
    return np.array(out)


def write_matrix(path, X, prefix="x") -> None:
    X = np.asarray(X, dtype=float)
    write_rows(path, [f"{prefix}{j + 1}" for j in range(X.shape[1])], X)


def read_matrix(path) -> np.ndarray:
    header, rows = read_rows(path)
    out = []
    for k, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise ValueError(f"{path}: line {k}: expected {len(header)} fields, found {len(r)}")
        out.append([_to_float(v, path, k) for v in r])
    if not out:
        raise ValueError(f"{path}: no data rows")
    return np.array(out)


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_default, indent=2, allow_nan=False)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def read_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
