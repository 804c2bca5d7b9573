"""CSV tables and JSON reports for solved models."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import DynamicProgram


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return repr(v)
    return str(v)


def _coords(label) -> list:
    if label is None:
        return []
    return list(label) if isinstance(label, (tuple, list)) else [label]


def _width(labels) -> int:
    return max((len(_coords(s)) for s in labels), default=0) if labels is not None else 0


def _header(prefix: str, width: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(width)]


def _padded(label, width: int) -> list[str]:
    c = [_fmt(v) for v in _coords(label)]
    return c + [""] * (width - len(c))


def write_q_csv(path, dp: DynamicProgram, g: np.ndarray) -> None:
    """One row per feasible pair: state index and label, action index and label, ``g``."""
    sw, aw = _width(dp.state_labels), _width(dp.action_labels)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["state", *_header("x", sw), "action", *_header("a", aw), "g"])
        for x, a in zip(*dp.pair_index):
            sl = dp.state_labels[x] if dp.state_labels is not None else None
            al = dp.action_labels[a] if dp.action_labels is not None else None
            out.writerow([int(x), *_padded(sl, sw), int(a), *_padded(al, aw), _fmt(g[x, a])])


def write_value_csv(path, dp: DynamicProgram, v: np.ndarray) -> None:
    sw = _width(dp.state_labels)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["state", *_header("x", sw), "value"])
        for x in range(dp.n_states):
            sl = dp.state_labels[x] if dp.state_labels is not None else None
            out.writerow([x, *_padded(sl, sw), _fmt(v[x])])


def write_policy_csv(path, dp: DynamicProgram, sigma: np.ndarray) -> None:
    sw, aw = _width(dp.state_labels), _width(dp.action_labels)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["state", *_header("x", sw), "action", *_header("a", aw)])
        for x, a in enumerate(sigma):
            sl = dp.state_labels[x] if dp.state_labels is not None else None
            al = dp.action_labels[a] if dp.action_labels is not None else None
            out.writerow([x, *_padded(sl, sw), int(a), *_padded(al, aw)])


def read_csv_column(path, column: str) -> list[str]:
    with open(path, newline="") as fh:
        return [row[column] for row in csv.DictReader(fh)]


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and infinities to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return v
    return obj


def write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")
