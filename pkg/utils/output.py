"""
Result writers: probe histories (CSV), field snapshots (VTK legacy text) and
the run summary (JSON).
"""
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from config import Config
from models.config_models import RunSummary
from models.fem_models import Mesh
from services.geometry import triangulate_faces
from utils.constants import VTK_POLYGON, VTK_TRIANGLE

AXES = ("x", "y", "z")


def probe_header(dimension: int) -> str:
    """Column names: t, then u, v, a per axis."""
    columns = ["t"]
    for field in ("u", "v", "a"):
        columns.extend(f"{field}_{AXES[i]}" for i in range(dimension))
    return ",".join(columns)


def write_probe_csv(path: Union[str, Path], times, u, v, a) -> Path:
    """
    Write one probe history.

    Args:
        path: output file
        times: (n,) time stamps
        u, v, a: (n, d) nodal displacement, velocity, acceleration
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    u = np.atleast_2d(np.asarray(u, dtype=float))
    table = np.column_stack([np.asarray(times, dtype=float), u, np.asarray(v, dtype=float), np.asarray(a, dtype=float)])
    np.savetxt(path, table, fmt=Config.CSV_FORMAT, delimiter=",", header=probe_header(u.shape[1]), comments="")
    return path


def read_probe_csv(path: Union[str, Path]) -> np.ndarray:
    """Probe table as written by write_probe_csv (header skipped)."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def _cells(mesh: Mesh):
    """Cell connectivity, VTK type and owning element of every exported cell."""
    cells: List[tuple] = []
    types: List[int] = []
    owners: List[int] = []
    for eid, element in enumerate(mesh.elements):
        if element.is_polyhedron:
            for tri in triangulate_faces(element, mesh.coordinates):
                if tri.degenerate:
                    continue
                cells.append(tri.node_ids)
                types.append(VTK_TRIANGLE)
                owners.append(eid)
        else:
            cells.append(tuple(element.node_ids))
            types.append(VTK_POLYGON)
            owners.append(eid)
    return cells, types, owners


def _vectors(values: np.ndarray, n_nodes: int, dimension: int) -> np.ndarray:
    values = np.asarray(values, dtype=float).reshape(n_nodes, dimension)
    if dimension == 2:
        values = np.column_stack([values, np.zeros(n_nodes)])
    return values


def write_vtk(path: Union[str, Path], mesh: Mesh, u: np.ndarray, v: Optional[np.ndarray] = None,
              a: Optional[np.ndarray] = None, title: str = "polyvem snapshot") -> Path:
    """
    VTK legacy unstructured grid in the reference configuration with nodal
    displacement (and velocity/acceleration) vectors. Polygons are cell type 7;
    polyhedra are exported as their triangulated surface (cell type 5).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, d = mesh.n_nodes, mesh.dimension
    points = _vectors(mesh.coordinates, n, d)
    cells, types, owners = _cells(mesh)
    size = sum(len(c) + 1 for c in cells)
    fmt = Config.CSV_FORMAT
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        np.savetxt(fh, points, fmt=fmt)
        fh.write(f"CELLS {len(cells)} {size}\n")
        for cell in cells:
            fh.write(" ".join(str(int(k)) for k in (len(cell),) + tuple(cell)) + "\n")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        np.savetxt(fh, np.asarray(types, dtype=int), fmt="%d")
        fh.write(f"CELL_DATA {len(cells)}\nSCALARS element_id int 1\nLOOKUP_TABLE default\n")
        np.savetxt(fh, np.asarray(owners, dtype=int), fmt="%d")
        fh.write(f"POINT_DATA {n}\n")
        for name, values in (("displacement", u), ("velocity", v), ("acceleration", a)):
            if values is None:
                continue
            fh.write(f"VECTORS {name} double\n")
            np.savetxt(fh, _vectors(values, n, d), fmt=fmt)
    return path


def write_summary(path: Union[str, Path], summary: RunSummary) -> Path:
    """Run summary as indented JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_summary(path: Union[str, Path]) -> RunSummary:
    return RunSummary.model_validate_json(Path(path).read_text(encoding="utf-8"))
