"""CSV/JSON emission with fixed 9-significant-digit floats."""
from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Mapping, Sequence


def fmt_float(x: float) -> str:
    s = format(float(x), ".9g")
    if math.isfinite(x) and not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def round_sig(x: float) -> float:
    return float(format(float(x), ".9g"))


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float):
        return round_sig(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def to_csv(rows: Sequence[Mapping], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def to_json(rows: Iterable[Mapping], columns: Sequence[str]) -> str:
    data = [{c: _jsonable(row[c]) for c in columns} for row in rows]
    return json.dumps(data, indent=2) + "\n"


def render(rows: Sequence[Mapping], columns: Sequence[str], fmt: str = "csv") -> str:
    if fmt == "csv":
        return to_csv(rows, columns)
    if fmt == "json":
        return to_json(rows, columns)
    raise ValueError(f"unknown format {fmt!r}")


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"
