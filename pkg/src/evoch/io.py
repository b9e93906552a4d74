"""CSV diagnostics and legacy-VTK ASCII snapshots.

CSV: one header line, then one row per step, every float written with
``format(x, ".17g")`` so reruns are byte-identical and values round-trip.

VTK: legacy ASCII POLYDATA with the current vertex positions, one triangle
per POLYGONS line, and POINT_DATA scalars ``u`` and ``w``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("step", "time", "mass", "energy", "grad_w_norm_sq", "u_min", "u_max", "xi", "mean_w", "area")
PARTIAL_MARKER = "PARTIAL"


def _fmt(x):
    return format(float(x), ".17g")


def csv_row(step, rec):
    values = [str(int(step))] + [_fmt(getattr(rec, c)) for c in CSV_COLUMNS[1:]]
    return ",".join(values) + "\n"


class CsvWriter:
    """Append-only writer; each row goes out in a single write and is flushed."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._fh.write(",".join(CSV_COLUMNS) + "\n")
        self._fh.flush()

    def write(self, step, rec):
        self._fh.write(csv_row(step, rec))
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path):
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "step" else float(v)) for k, v in r.items()} for r in rows]


def write_vtk(path, vertices, triangles, point_data, title="evoch snapshot"):
    n, m = len(vertices), len(triangles)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET POLYDATA", f"POINTS {n} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in vertices]
    lines.append(f"POLYGONS {m} {4 * m}")
    lines += [f"3 {a} {b} {c}" for a, b, c in triangles]
    lines.append(f"POINT_DATA {n}")
    for name, values in point_data.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [_fmt(v) for v in values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk(path):
    """Minimal reader for files produced by write_vtk."""
    tokens = Path(path).read_text().split("\n")
    i = 0
    out = {"point_data": {}}
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            out["points"] = np.array([[float(v) for v in tokens[i + 1 + k].split()] for k in range(n)])
            i += n
        elif line.startswith("POLYGONS"):
            m = int(line.split()[1])
            out["triangles"] = np.array([[int(v) for v in tokens[i + 1 + k].split()[1:]] for k in range(m)])
            i += m
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            n = len(out["points"])
            out["point_data"][name] = np.array([float(tokens[i + 2 + k]) for k in range(n)])
            i += n + 1
        i += 1
    return out
