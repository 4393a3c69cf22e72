"""Writers for VTK legacy fields, CSV tables and JSON summaries.

All writers are deterministic: fixed column order, ``repr`` floats and
sorted JSON keys, so identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InternalError


def _num(x):
    x = float(x)
    return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))


def write_vtk(path, mesh, point_data, title="erheo fields"):
    """Legacy ASCII unstructured grid with linear triangles and point data.

    ``point_data`` maps names to arrays shaped ``(n_nodes,)`` or ``(n_nodes, 2)``.
    """
    path = Path(path)
    n = mesh.n_nodes
    lines = ["# vtk DataFile Version 2.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    lines += [f"{_num(x)} {_num(y)} 0.0" for x, y in mesh.nodes]
    m = mesh.n_triangles
    lines.append(f"CELLS {m} {4 * m}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {m}")
    lines += ["5"] * m
    lines.append(f"POINT_DATA {n}")
    for name, arr in point_data.items():
        arr = np.asarray(arr, dtype=float)
        if arr.shape == (n,):
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_num(a) for a in arr]
        elif arr.shape == (n, 2):
            lines.append(f"VECTORS {name} double")
            lines += [f"{_num(a)} {_num(b)} 0.0" for a, b in arr]
        else:
            raise InternalError(f"point data {name!r} has shape {arr.shape}, expected ({n},) or ({n}, 2)")
    path.write_text("\n".join(lines) + "\n")
    check_vtk_header(path, n)
    return path


def check_vtk_header(path, n_nodes):
    """Re-read a VTK file and confirm the point count and point-data sizes."""
    with open(path) as fh:
        head = [next(fh).strip() for _ in range(5)]
        body = fh.read().split("\n")
    if not head[0].startswith("# vtk DataFile") or head[2] != "ASCII" or head[3] != "DATASET UNSTRUCTURED_GRID":
        raise InternalError(f"{path}: malformed VTK header")
    count = int(head[4].split()[1])
    if count != n_nodes:
        raise InternalError(f"{path}: POINTS {count} but mesh has {n_nodes} nodes")
    pd = [ln for ln in body if ln.startswith("POINT_DATA")]
    if pd and int(pd[0].split()[1]) != n_nodes:
        raise InternalError(f"{path}: POINT_DATA count differs from the node count")
    return count


def write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c, "")) for c in columns])
    return Path(path)


def _cell(x):
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return "" if x is None else str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return _num(x)


HISTORY_COLUMNS = ["iter", "flow_residual", "temp_residual", "coupled_residual",
                   "norm_X_v", "norm_1_zeta", "norm_2_zeta"]


def write_history(path, history):
    return write_csv(path, history, HISTORY_COLUMNS)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))
    return Path(path)
