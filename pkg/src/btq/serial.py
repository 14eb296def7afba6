"""JSON writer with fixed float formatting.

Floats are written with 17 significant digits so that every binary64 value
round-trips and identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
import math


def format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent: int | None = None, sort_keys: bool = False) -> str:
    """Like ``json.dumps`` but with floats rendered by ``format_float``."""

    def enc(o, level):
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, float):
            return format_float(o)
        if isinstance(o, (int, str)):
            return json.dumps(o)
        if isinstance(o, dict):
            items = sorted(o.items()) if sort_keys else list(o.items())
            if not items:
                return "{}"
            parts = [json.dumps(str(k)) + ": " + enc(v, level + 1) for k, v in items]
            return _wrap("{", "}", parts, level, indent)
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            return _wrap("[", "]", [enc(v, level + 1) for v in o], level, indent)
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0)


def _wrap(open_, close, parts, level, indent):
    if indent is None:
        return open_ + ", ".join(parts) + close
    pad = "\n" + " " * (indent * (level + 1))
    return open_ + pad + ("," + pad).join(parts) + "\n" + " " * (indent * level) + close
