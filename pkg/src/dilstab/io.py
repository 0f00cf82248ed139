"""CSV and JSON persistence for sample paths and reports."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .model import SamplePath


def write_path_csv(path: SamplePath, dest) -> None:
    """Header ``t,x``; 17 significant digits so the round trip is exact."""
    with open(dest, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,x\n")
        for t, x in zip(path.times, path.values):
            fh.write(f"{t:.17g},{x:.17g}\n")


def read_path_csv(src) -> SamplePath:
    with open(src, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "x"]:
        raise ValueError(f"{src}: expected header 't,x'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float).reshape(-1, 2)
    return SamplePath(data[:, 0], data[:, 1])


def dump_json(obj, dest=None) -> str:
    """Canonical JSON text (sorted keys, fixed indent, trailing newline)."""
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if dest is not None:
        Path(dest).write_text(text, encoding="utf-8", newline="\n")
    return text


def jsonable(x):
    """Plain Python containers and numbers; non-finite floats become null."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    return x
