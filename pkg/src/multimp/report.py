"""Deterministic JSON and CSV emission.

Floats are written with 17 significant digits so that every value
round-trips exactly; non-finite floats become ``null``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources

import numpy as np

SCHEMA_VERSION = "1"


def _float(v):
    v = float(v)
    if not math.isfinite(v):
        return "null"
    text = format(v, ".17g")
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def _encode(obj, indent, level, out):
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append({None: "null", True: "true", False: "false"}[None if obj is None else bool(obj)])
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, np.ndarray):
        _encode(obj.tolist(), indent, level, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for k, (key, val) in enumerate(obj.items()):
            out.append(("," if k else "") + pad + json.dumps(str(key)) + ": ")
            _encode(val, indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        scalar = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj)
        if scalar:
            parts = []
            for v in obj:
                buf = []
                _encode(v, indent, level + 1, buf)
                parts.append("".join(buf))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[")
        for k, val in enumerate(obj):
            out.append(("," if k else "") + pad)
            _encode(val, indent, level + 1, out)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent=2):
    out = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"


def csv_text(header, rows):
    """CSV with a header row, comma separator, LF endings and repr floats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(float(v)) else format(float(v), ".17g")
    return v


def load_schema():
    text = resources.files("multimp").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)
