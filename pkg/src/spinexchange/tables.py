"""Plain-text result tables.

Layout (documented in ``schema/tables.md``)::

    # format="spinexchange-table"
    # version=1
    # table="cuts"
    # <key>=<JSON value>
    # columns=["t_s","rho_exc_A","rho_exc_B"]
    0.0 0.2329 0.0
    ...

Numbers are written with ``repr`` so they round-trip exactly and identical
inputs give byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

FORMAT = "spinexchange-table"
VERSION = 1


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        if not v or any(c.isspace() for c in v):
            raise ValueError(f"string cell {v!r} must be non-empty without whitespace")
        return v
    return repr(float(v))


def _header_value(v) -> str:
    return json.dumps(v, sort_keys=True, separators=(",", ":"), allow_nan=False)


def format_table(name: str, columns: Sequence[str], rows, meta: Mapping | None = None) -> str:
    """Render a table; ``rows`` is a 2-D array or an iterable of sequences."""
    lines = [f"# format={_header_value(FORMAT)}", f"# version={VERSION}",
             f"# table={_header_value(name)}"]
    for key in sorted(meta or {}):
        if key in ("format", "version", "table", "columns"):
            raise ValueError(f"reserved metadata key {key!r}")
        if not key.isidentifier():
            raise ValueError(f"metadata key {key!r} must be an identifier")
        lines.append(f"# {key}={_header_value(meta[key])}")
    lines.append(f"# columns={_header_value(list(columns))}")
    ncol = len(columns)
    for row in rows:
        row = list(row)
        if len(row) != ncol:
            raise ValueError(f"row has {len(row)} cells, expected {ncol}")
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_table(path, name: str, columns: Sequence[str], rows, meta: Mapping | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = format_table(name, columns, rows, meta)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def parse_table(text: str):
    """Inverse of :func:`format_table`: returns (meta, columns, data).

    ``data`` maps column name to a numpy array (float where possible).
    """
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, val = line[1:].strip().partition("=")
            if not sep:
                continue
            meta[key.strip()] = json.loads(val)
        elif line.strip():
            body.append(line.split())
    if meta.get("format") != FORMAT:
        raise ValueError("not a spinexchange table")
    columns = meta.pop("columns")
    cells = list(zip(*body)) if body else [()] * len(columns)
    data = {}
    for name, col in zip(columns, cells):
        try:
            data[name] = np.array([float(c) for c in col])
        except ValueError:
            data[name] = np.array(col, dtype=object)
    return meta, columns, data


def read_table(path):
    return parse_table(Path(path).read_text(encoding="utf-8"))


def write_summary(path, values: Mapping) -> Path:
    """Key=value run summary (JSON values, sorted keys). Not byte-stable: holds wall time."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{k}={_header_value(values[k])}" for k in sorted(values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_summary(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = json.loads(v)
    return out
