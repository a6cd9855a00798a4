"""Deterministic serialization of results to JSON, CSV and text tables.

Every result passed around the service and the CLI is a plain dict with a
``type`` tag.  JSON output uses sorted keys and Python's shortest round-trip
float repr, so it round-trips losslessly and is byte-identical for identical
inputs.

CSV layouts (headers are fixed):

* constants: ``name,value``
* expansion: ``section,term,value`` one ledger term per row; vector values are
  space-separated components
* diagnostic: ``section,term,value`` (ledger rows then envelope rows)
* branch: ``eps,lambda_fit,alpha_fit,peak,residual,lambda2eps``
* anything else: ``key,value`` over the flattened dict
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math

import numpy as np

from .errors import BubbleLabError, ConfigError

BRANCH_COLUMNS = ("eps", "lambda_fit", "alpha_fit", "peak", "residual", "lambda2eps")
CONSTANT_KEYS = ("c0", "Sn", "cbar1", "cbar2", "cbar3", "cbar5", "gamma", "rho")


def jsonable(obj):
    """Recursively convert numpy and dataclass values into JSON-native ones."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def to_json(result):
    return json.dumps(jsonable(result), sort_keys=True, indent=2) + "\n"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def _flatten(d, prefix=""):
    out = []
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.extend(_flatten(v, key + "."))
        else:
            out.append((key, v))
    return out


def _rows(result):
    t = result.get("type")
    body = result.get("result", result)
    if t == "constants":
        return ("name", "value"), [(k, body.get(k)) for k in CONSTANT_KEYS] + (
            [("c1", body["c1"])] if body.get("c1") is not None else [])
    if t == "branch":
        return BRANCH_COLUMNS, [tuple(r.get(c) for c in BRANCH_COLUMNS) for r in body["rows"]]
    if t == "expansion":
        rows = [("term", k, v) for k, v in sorted(body["terms"].items())]
        rows += [("envelope", k, v) for k, v in sorted(body["envelope_terms"].items())]
        rows += [("summary", k, body.get(k)) for k in ("envelope", "numeric_lhs", "discrepancy")
                 if body.get(k) is not None]
        return ("section", "term", "value"), rows
    if t == "diagnostic":
        rows = [("ledger", k, v) for k, v in sorted(body["ledger"].items())]
        rows += [("envelope", k, v) for k, v in sorted(body["envelope_terms"].items())]
        rows += [("summary", "verdict", body["verdict"]), ("summary", "envelope", body["envelope"])]
        return ("section", "term", "value"), rows
    return ("key", "value"), _flatten(body if isinstance(body, dict) else {"value": body})


def to_csv(result):
    header, rows = _rows(jsonable(result))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def to_text(result):
    header, rows = _rows(jsonable(result))
    cells = [list(header)] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    for k, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def emit_report(result, fmt="json", path=None):
    """Serialize ``result``; write to ``path`` when given.  Returns the text."""
    if fmt == "json":
        text = to_json(result)
    elif fmt == "csv":
        text = to_csv(result)
    elif fmt in ("text", "text-table"):
        text = to_text(result)
    else:
        raise ConfigError(f"format: expected json, csv or text, got {fmt!r}")
    if path:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise BubbleLabError(f"cannot write report to {path!r}: {exc}") from None
    return text
