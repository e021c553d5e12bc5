"""CSV and JSON output.

Series files use the :data:`~qchlab.diagnostics.COLUMNS` header, values with
17 significant digits and LF line endings, so a written file parses back to
identical floats.  A partial series ends with a ``# truncated`` comment line.
"""
from __future__ import annotations

import json
import os

import numpy as np

from .diagnostics import COLUMNS, DiagnosticRow, TimeSeries

__all__ = [
    "TRUNCATION_MARKER",
    "format_float",
    "write_series",
    "read_series",
    "write_table",
    "read_table",
    "write_snapshot",
    "write_histogram",
    "write_manifest",
]

TRUNCATION_MARKER = "# truncated"


def format_float(x) -> str:
    return "%.17g" % float(x)


def _write_lines(path, lines):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def write_table(path, columns, data, truncated=False):
    """Write equal-length columns ``data[name]`` in the order of ``columns``."""
    cols = [np.asarray(data[c], dtype=float) for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("all columns must have the same length")
    lines = [",".join(columns)]
    lines += [",".join(format_float(c[i]) for c in cols) for i in range(n)]
    if truncated:
        lines.append(TRUNCATION_MARKER)
    _write_lines(path, lines)


def read_table(path):
    """Return ``(columns, dict of arrays, truncated)``."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split(",")
    rows, truncated = [], False
    for line in lines[1:]:
        if not line:
            continue
        if line.startswith("#"):
            truncated = truncated or line.strip() == TRUNCATION_MARKER
            continue
        rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, {h: arr[:, i] for i, h in enumerate(header)}, truncated


def write_series(series: TimeSeries, path):
    """Write the diagnostic rows of ``series`` as canonical CSV."""
    lines = [",".join(COLUMNS)]
    lines += [",".join(format_float(v) for v in row.values())
              for row in series.rows]
    if series.truncated:
        lines.append(TRUNCATION_MARKER)
    _write_lines(path, lines)


def read_series(path, label="") -> TimeSeries:
    header, data, truncated = read_table(path)
    if tuple(header) != COLUMNS:
        raise ValueError(f"{path}: not a series file (header {header})")
    n = len(data["t"])
    rows = [DiagnosticRow(*(float(data[c][i]) for c in COLUMNS))
            for i in range(n)]
    return TimeSeries(label=label or os.path.basename(path), rows=rows,
                      truncated=truncated)


def write_snapshot(path, state):
    """Field snapshot of a hybrid state: x2, Re phi, Im phi, f1, w."""
    psi = state.phi.values
    write_table(path, ("x2", "re_phi", "im_phi", "f1", "w"), {
        "x2": state.grid.nodes, "re_phi": psi.real, "im_phi": psi.imag,
        "f1": state.f1.values, "w": state.w.values})


def write_histogram(path, centers, counts, model):
    write_table(path, ("bin_center", "count", "model_density"),
                {"bin_center": centers, "count": counts,
                 "model_density": model})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_manifest(path, manifest: dict):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
