"""Table writers.

Every table starts with a ``#`` comment recording the config hash, seed and
package version, then a header row.  Floats are written with ``repr`` so the
bytes depend only on the values.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from importlib import metadata

try:
    VERSION = metadata.version("artifact")
except metadata.PackageNotFoundError:  # pragma: no cover - running from a checkout
    VERSION = "0.0.0"


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"{self.name}: expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(values)

    def column(self, name):
        c = self.columns.index(name)
        return [row[c] for row in self.rows]


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if hasattr(v, "item"):  # numpy scalar
        v = v.item()
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return v


def _json_cell(v):
    v = _cell(v)
    if v == "nan":
        return None
    if isinstance(v, str):
        try:
            return float(v) if v not in ("inf", "-inf") else v
        except ValueError:
            return v
    return v


def write_table(table: Table, out_dir: str, meta: dict, fmt: str = "csv") -> str:
    os.makedirs(out_dir, exist_ok=True)
    meta = dict(meta)
    meta.setdefault("version", VERSION)
    if fmt == "csv":
        path = os.path.join(out_dir, table.name + ".csv")
        comment = "# " + " ".join(f"{k}={meta[k]}" for k in sorted(meta))
        with open(path, "w", newline="") as fh:
            fh.write(comment + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(table.columns)
            for row in table.rows:
                w.writerow([_cell(v) for v in row])
    elif fmt == "json":
        path = os.path.join(out_dir, table.name + ".json")
        doc = {"meta": meta, "columns": list(table.columns),
               "rows": [[_json_cell(v) for v in row] for row in table.rows]}
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def read_csv_table(path: str):
    """(meta dict, columns, rows of strings) from a file written above."""
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        meta = dict(item.split("=", 1) for item in first[2:].split())
        reader = csv.reader(fh)
        cols = next(reader)
        return meta, cols, [row for row in reader]
