"""Tabular results and their CSV form.

Anything with a ``COLUMNS`` (or ``columns``) sequence and a ``rows()``
iterator can be written by :func:`emit_csv`.  Floats are written with 17
significant digits so :func:`read_csv` gets back the exact same values.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["SweepResult", "emit_csv", "read_csv", "format_value"]


@dataclass
class SweepResult:
    """One row per (configuration, seed) cell, in a fixed column order."""

    columns: tuple
    records: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self.records.append(tuple(values))

    def rows(self):
        return iter(self.records)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.records]

    def where(self, **match) -> list:
        idx = {self.columns.index(k): v for k, v in match.items()}
        return [r for r in self.records if all(r[i] == v for i, v in idx.items())]

    def __len__(self) -> int:
        return len(self.records)


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def _columns(result):
    cols = getattr(result, "columns", None) or getattr(result, "COLUMNS", None)
    if cols is None:
        raise TypeError(f"cannot tabulate {type(result).__name__}")
    return tuple(cols)


def emit_csv(result, path) -> Path:
    """Write ``result`` as a header row plus one row per record."""
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_columns(result))
    for row in result.rows():
        writer.writerow([format_value(v) for v in row])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def _parse(cell: str):
    if cell == "":
        return None
    if cell in ("true", "false"):
        return cell == "true"
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def read_csv(path) -> SweepResult:
    """Inverse of :func:`emit_csv` (types inferred per cell)."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        return SweepResult(tuple(header), [tuple(_parse(c) for c in row) for row in reader])
