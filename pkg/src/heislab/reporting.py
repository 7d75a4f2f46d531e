"""Artifact writers: delimited measurement tables and JSON run summaries.

One CSV per experiment, one row per measurement, LF line endings, floats at
17 significant digits so reruns with the same config and seed produce
byte-identical bodies.  Timestamps never enter file contents; they live in
the artifact file names only.
"""

from __future__ import annotations

import datetime
import json
import os
import platform
from typing import Iterable, Sequence

import numpy as np
import scipy

from .solver import GridMap, Lattice

__all__ = [
    "artifact_base",
    "format_cell",
    "gridmap_table",
    "load_gridmap_values",
    "run_meta",
    "write_csv",
    "write_json",
]


def format_cell(v) -> str:
    """One CSV cell: floats at 17 significant digits, everything else plain."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(format_cell(c) for c in row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_meta() -> dict:
    from . import __version__

    return {
        "heislab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def artifact_base(experiment: str, seed: int, when: datetime.datetime | None = None) -> str:
    """`<experiment>-<timestamp>-<seed>` file-name stem."""
    when = when or datetime.datetime.now(datetime.timezone.utc)
    return f"{experiment}-{when.strftime('%Y%m%dT%H%M%SZ')}-{seed}"


def _index_header(n: int) -> list[str]:
    if n == 1:
        return ["ix", "iy", "it"]
    return [f"ix{j}" for j in range(1, n + 1)] + [f"iy{j}" for j in range(1, n + 1)] + ["it"]


def _coord_header(n: int) -> list[str]:
    if n == 1:
        return ["x", "y", "t"]
    return [f"x{j}" for j in range(1, n + 1)] + [f"y{j}" for j in range(1, n + 1)] + ["t"]


def gridmap_table(u: GridMap) -> tuple[list[str], list[list]]:
    """Header and rows serializing a lattice map, sorted by integer index."""
    lat = u.lattice
    n = lat.n
    order = np.lexsort(tuple(lat.indices[:, k] for k in range(lat.indices.shape[1] - 1, -1, -1)))
    header = (
        _index_header(n)
        + _coord_header(n)
        + ["boundary", "valid"]
        + [f"v{k}" for k in range(u.values.shape[1])]
    )
    rows = []
    for i in order:
        rows.append(
            [int(v) for v in lat.indices[i]]
            + [float(v) for v in lat.points[i]]
            + [bool(lat.boundary_mask[i]), bool(u.valid[i])]
            + [float(v) for v in u.values[i]]
        )
    return header, rows


def load_gridmap_values(path: str, lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    """Values and valid mask from a gridmap CSV, aligned to `lattice` node ids.

    Rows are matched by integer index, so the CSV may come from any run on
    the same geometry; every lattice node must be covered.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        raw = [line.strip().split(",") for line in fh if line.strip()]
    n = lattice.n
    idx_cols = _index_header(n)
    try:
        pos = [header.index(c) for c in idx_cols]
        valid_col = header.index("valid")
    except ValueError as exc:
        raise ValueError(f"{path}: missing column ({exc})") from exc
    val_cols = [k for k, c in enumerate(header) if c.startswith("v") and c[1:].isdigit()]
    if not val_cols:
        raise ValueError(f"{path}: no value columns")
    idx = np.array([[int(row[p]) for p in pos] for row in raw], dtype=np.int64)
    ids = lattice._lookup(idx)
    if np.any(ids < 0):
        raise ValueError(f"{path}: a row's index lies outside the lattice")
    values = np.full((lattice.node_count, len(val_cols)), np.nan)
    valid = np.zeros(lattice.node_count, dtype=bool)
    for row, node in zip(raw, ids):
        values[node] = [float(row[k]) for k in val_cols]
        valid[node] = row[valid_col] == "1"
    if np.any(np.isnan(values)):
        raise ValueError(f"{path}: does not cover every lattice node")
    return values, valid
