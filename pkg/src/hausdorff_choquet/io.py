"""Serialization: field dumps, set files, JSON reports and sweep CSVs.

Field dump (text, version 1)::

    HCF 1
    n 2
    bbox -2.0 2.0
    cells 128
    gradient analytic        # or: none | finite-difference
    values
    <cells^n values, row-major (last axis fastest), one per line>
    gradient                 # only when a gradient is stored
    <cells^n values>

Set file (JSON)::

    {"grid": {"n": 2, "bbox": [lo, hi], "cells": 128}, "cells": [[i, j], ...]}

Reports are JSON with sorted keys; non-finite floats become ``null``.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .grid import DiscreteSet, Grid, ScalarField, make_grid

FIELD_MAGIC = "HCF 1"
CSV_SCHEMA_VERSION = 1


def _grid_from_header(n: int, bbox, cells: int) -> Grid:
    return make_grid(int(n), tuple(float(x) for x in bbox), int(cells))


def write_field(path, f: ScalarField) -> None:
    g = f.grid
    lo, hi = g.bbox()[0]
    lines = [FIELD_MAGIC, f"n {g.n}", f"bbox {lo!r} {hi!r}", f"cells {g.cells}"]
    lines.append(f"gradient {f.gradient_kind or 'none'}")
    lines.append("values")
    lines.extend(repr(float(v)) for v in f.dense().ravel())
    if f.gradient is not None:
        lines.append("gradient")
        lines.extend(repr(float(v)) for v in f.dense_gradient().ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path) -> ScalarField:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != FIELD_MAGIC:
        raise ValidationError(f"{path}: not a field dump (expected header {FIELD_MAGIC!r})")
    head = {}
    i = 1
    while i < len(text) and text[i].strip() != "values":
        key, *rest = text[i].split()
        head[key] = rest
        i += 1
    try:
        g = _grid_from_header(head["n"][0], head["bbox"], head["cells"][0])
        kind = head.get("gradient", ["none"])[0]
    except (KeyError, IndexError) as exc:
        raise ValidationError(f"{path}: incomplete header ({exc})") from None
    body = text[i + 1 :]
    size = g.size
    if len(body) < size:
        raise ValidationError(f"{path}: expected {size} values, found {len(body)}")
    vals = np.array([float(x) for x in body[:size]]).reshape(g.shape)
    grad = None
    if kind != "none":
        rest = body[size:]
        if not rest or rest[0].strip() != "gradient" or len(rest) - 1 < size:
            raise ValidationError(f"{path}: gradient section missing or short")
        grad = np.array([float(x) for x in rest[1 : size + 1]]).reshape(g.shape)
    return ScalarField.from_dense(g, vals, grad, kind if grad is not None else "analytic")


def write_set(path, E: DiscreteSet) -> None:
    g = E.grid
    lo, hi = g.bbox()[0]
    doc = {"grid": {"n": g.n, "bbox": [lo, hi], "cells": g.cells}, "cells": E.coords.tolist()}
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def read_set(path) -> DiscreteSet:
    try:
        doc = json.loads(Path(path).read_text())
        gd = doc["grid"]
        g = _grid_from_header(gd["n"], gd["bbox"], gd["cells"])
        coords = np.asarray(doc.get("cells", []), dtype=np.int64).reshape(-1, g.n)
    except (KeyError, ValueError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed set file ({exc})") from None
    if coords.size and (coords.min() < 0 or coords.max() >= g.cells):
        raise ValidationError(f"{path}: cell index outside the grid")
    return DiscreteSet.from_coords(g, coords)


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(x) for x in obj]
    if hasattr(obj, "to_json"):
        return _clean(obj.to_json())
    return obj


def dumps_report(obj) -> str:
    """Deterministic JSON text for any report object or plain structure."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def sweep_csv(rows, columns, footer=()) -> str:
    """Frozen sweep CSV: a schema comment, the header, one row per point, ``#`` footer lines."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"# schema v{CSV_SCHEMA_VERSION}"])
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if (isinstance(x, float) and not math.isfinite(x)) else repr(float(x)) for x in r])
    for line in footer:
        w.writerow([f"# {line}"])
    return buf.getvalue()
