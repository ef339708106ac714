"""Reading and writing grid functions, cell sets and reports.

Serialisation is canonical (sorted keys, fixed indent, shortest float repr),
so write -> read -> write reproduces a file byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .dyadic import CellSet, GridFunction, GridSpec

GRID_FUNCTION = "capacitary.gridfunction"
CELL_SET = "capacitary.cellset"
FORMAT_VERSION = 1

__all__ = [
    "spec_to_json",
    "spec_from_json",
    "dumps",
    "grid_function_to_json",
    "grid_function_from_json",
    "cell_set_to_json",
    "cell_set_from_json",
    "grid_function_to_csv",
    "grid_function_from_csv",
    "save",
    "load",
    "report_csv",
]


def _frac(x: Fraction) -> str:
    return str(Fraction(x))


def spec_to_json(spec: GridSpec) -> dict:
    return {"n": spec.n, "depth": spec.depth,
            "root_origin": [_frac(c) for c in spec.root_origin],
            "root_side": _frac(spec.root_side)}


def spec_from_json(obj: dict) -> GridSpec:
    origin = obj.get("root_origin")
    return GridSpec(int(obj["n"]), int(obj["depth"]),
                    None if origin is None else tuple(Fraction(str(c)) for c in origin),
                    Fraction(str(obj.get("root_side", "1"))))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def grid_function_to_json(f: GridFunction, meta: dict | None = None) -> dict:
    out = {"format": GRID_FUNCTION, "version": FORMAT_VERSION, "grid": spec_to_json(f.spec),
           "order": "row-major", "values": [float(v) for v in f.values]}
    if meta:
        out["meta"] = meta
    return out


def grid_function_from_json(obj: dict) -> GridFunction:
    if obj.get("format") != GRID_FUNCTION:
        raise ValueError(f"not a grid function file (format={obj.get('format')!r})")
    if obj.get("order", "row-major") != "row-major":
        raise ValueError("only row-major value order is supported")
    return GridFunction(spec_from_json(obj["grid"]), np.asarray(obj["values"], dtype=float))


def cell_set_to_json(E: CellSet, meta: dict | None = None) -> dict:
    out = {"format": CELL_SET, "version": FORMAT_VERSION, "grid": spec_to_json(E.spec),
           "cells": [int(i) for i in E.indices]}
    if meta:
        out["meta"] = meta
    return out


def cell_set_from_json(obj: dict) -> CellSet:
    if obj.get("format") != CELL_SET:
        raise ValueError(f"not a cell set file (format={obj.get('format')!r})")
    return CellSet.from_indices(spec_from_json(obj["grid"]), obj["cells"])


def grid_function_to_csv(f: GridFunction) -> str:
    """One row per cell: row-major index, integer cell coordinates, value."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    n = f.spec.n
    origin = ";".join(_frac(c) for c in f.spec.root_origin)
    writer.writerow([f"# n={n} depth={f.spec.depth} root_origin={origin} root_side={_frac(f.spec.root_side)}"])
    writer.writerow(["index", *[f"i{a}" for a in range(n)], "value"])
    coords = np.indices(f.spec.shape).reshape(n, -1).T
    for k, (c, v) in enumerate(zip(coords, f.values)):
        writer.writerow([k, *map(int, c), repr(float(v))])
    return buf.getvalue()


def grid_function_from_csv(text: str) -> GridFunction:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("missing grid header line")
    header = dict(tok.split("=", 1) for tok in lines[0][2:].split())
    origin = tuple(Fraction(c) for c in header["root_origin"].split(";"))
    spec = GridSpec(int(header["n"]), int(header["depth"]), origin, Fraction(header["root_side"]))
    rows = list(csv.reader(lines[2:]))
    values = np.empty(spec.num_cells)
    if len(rows) != spec.num_cells:
        raise ValueError(f"expected {spec.num_cells} rows, got {len(rows)}")
    for row in rows:
        values[int(row[0])] = float(row[-1])
    return GridFunction(spec, values)


def save(obj, path, fmt: str | None = None, meta: dict | None = None) -> Path:
    """Write a GridFunction, CellSet or plain dict; format from suffix unless given."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "json")
    if fmt == "csv":
        if not isinstance(obj, GridFunction):
            raise ValueError("CSV output is only defined for grid functions")
        text = grid_function_to_csv(obj)
    elif isinstance(obj, GridFunction):
        text = dumps(grid_function_to_json(obj, meta))
    elif isinstance(obj, CellSet):
        text = dumps(cell_set_to_json(obj, meta))
    else:
        text = dumps(obj)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def load(path):
    """Read a GridFunction or CellSet file (JSON or CSV)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".csv":
        return grid_function_from_csv(text)
    obj = json.loads(text)
    kind = obj.get("format")
    if kind == GRID_FUNCTION:
        return grid_function_from_json(obj)
    if kind == CELL_SET:
        return cell_set_from_json(obj)
    raise ValueError(f"{path}: unknown format {kind!r}")


def report_csv(reports) -> str:
    """Flat ``report, key, value`` table for a list of CheckReports."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["report", "key", "value"])
    for i, rep in enumerate(reports):
        for key, value in rep.rows():
            writer.writerow([i, key, json.dumps(value) if isinstance(value, (list, dict)) else value])
    return buf.getvalue()
