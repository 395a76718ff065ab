"""Deterministic JSON rendering for reports.

Identical inputs must produce byte-identical reports, so floats are
formatted with a fixed rule (17 significant digits, lowercase
scientific) instead of repr, and key order is the insertion order of
the report builders.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from . import __version__

SCHEMA = "fiocalc-report/1"


def format_float(x: float) -> str:
    # 17 significant digits, lowercase scientific
    if math.isnan(x):
        return "null"
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return f"{x:.16e}"


def _render(obj, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif isinstance(obj, (complex, np.complexfloating)):
        _render({"re": float(obj.real), "im": float(obj.imag)}, out)
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, np.ndarray):
        _render(obj.tolist(), out)
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _render(v, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k), ensure_ascii=True))
            out.append(":")
            _render(v, out)
        out.append("}")
    else:
        raise TypeError(f"cannot render {type(obj).__name__} into a report")


def canonical_json(obj) -> str:
    out: list[str] = []
    _render(obj, out)
    return "".join(out)


def envelope(kind: str, config_text: str | None, body: dict) -> dict:
    digest = hashlib.sha256((config_text or "").encode()).hexdigest()
    return {"schema": SCHEMA, "kind": kind, "version": __version__,
            "config_sha256": digest, "report": body}
