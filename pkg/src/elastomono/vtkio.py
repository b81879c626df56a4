"""Minimal legacy-VTK STRUCTURED_POINTS writer (ASCII)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def write_structured_points(
    path,
    dimensions,
    spacing,
    origin=(0.0, 0.0, 0.0),
    point_vectors: dict | None = None,
    point_scalars: dict | None = None,
    cell_scalars: dict | None = None,
    title: str = "elastomono output",
) -> Path:
    """Write arrays already in VTK order (x index fastest).

    ``dimensions`` counts lattice points; cell arrays therefore have
    ``prod(dimensions - 1)`` entries.
    """
    path = Path(path)
    dims = [int(d) for d in dimensions]
    n_points = int(np.prod(dims))
    n_cells = int(np.prod([max(d - 1, 1) for d in dims]))
    lines = [
        "# vtk DataFile Version 3.0",
        title[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS {} {} {}".format(*dims),
        "ORIGIN {!r} {!r} {!r}".format(*(float(x) for x in origin)),
        "SPACING {!r} {!r} {!r}".format(*(float(x) for x in spacing)),
    ]
    if point_vectors or point_scalars:
        lines.append(f"POINT_DATA {n_points}")
        for name, arr in (point_vectors or {}).items():
            arr = np.asarray(arr, dtype=float).reshape(n_points, 3)
            lines.append(f"VECTORS {name} double")
            lines.extend(" ".join(f"{v:.17g}" for v in row) for row in arr)
        for name, arr in (point_scalars or {}).items():
            lines.extend(_scalars(name, arr, n_points))
    if cell_scalars:
        lines.append(f"CELL_DATA {n_cells}")
        for name, arr in cell_scalars.items():
            lines.extend(_scalars(name, arr, n_cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def _scalars(name, arr, count):
    arr = np.asarray(arr).reshape(count)
    if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
        out = [f"SCALARS {name} int 1", "LOOKUP_TABLE default"]
        out.extend(" ".join(str(int(v)) for v in arr[i:i + 9]) for i in range(0, count, 9))
    else:
        out = [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out.extend(" ".join(f"{v:.17g}" for v in arr[i:i + 9]) for i in range(0, count, 9))
    return out


def read_structured_points_header(path) -> dict:
    """Parse DIMENSIONS/ORIGIN/SPACING back from a file written above."""
    meta = {}
    with Path(path).open() as fh:
        for line in fh:
            key, *vals = line.split()
            if key in ("DIMENSIONS",):
                meta["dimensions"] = tuple(int(v) for v in vals)
            elif key in ("ORIGIN", "SPACING"):
                meta[key.lower()] = tuple(float(v) for v in vals)
            if key in ("POINT_DATA", "CELL_DATA"):
                break
    return meta
