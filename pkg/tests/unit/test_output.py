import numpy as np
import pytest

from models.config_models import RunSummary
from utils.output import probe_header, read_probe_csv, read_summary, write_probe_csv, write_summary, write_vtk

pytestmark = pytest.mark.unit


def test_probe_header():
    assert probe_header(2) == "t,u_x,u_y,v_x,v_y,a_x,a_y"
    assert probe_header(3).split(",")[-1] == "a_z"


def test_probe_csv_round_trip(tmp_path):
    times = np.array([0.0, 0.5, 1.0])
    u = np.arange(6.0).reshape(3, 2)
    path = write_probe_csv(tmp_path / "out" / "probe_tip.csv", times, u, 2.0 * u, -u)
    assert path.read_text().splitlines()[0] == "t,u_x,u_y,v_x,v_y,a_x,a_y"
    table = read_probe_csv(path)
    assert table.shape == (3, 7)
    np.testing.assert_allclose(table[:, 0], times)
    np.testing.assert_allclose(table[:, 3:5], 2.0 * u)


def _sections(path):
    return path.read_text().splitlines()


def test_polygon_snapshot(tmp_path, square_mesh):
    u = np.arange(8.0)
    lines = _sections(write_vtk(tmp_path / "square.vtk", square_mesh, u, v=u))
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "DATASET UNSTRUCTURED_GRID" in lines
    assert "POINTS 4 double" in lines
    assert lines[lines.index("CELLS 1 5") + 1] == "4 0 1 2 3"
    assert lines[lines.index("CELL_TYPES 1") + 1] == "7"
    assert "VECTORS displacement double" in lines
    assert "VECTORS velocity double" in lines
    assert "VECTORS acceleration double" not in lines
    # 2D vectors are padded with a zero z component
    row = lines[lines.index("VECTORS displacement double") + 1].split()
    assert [float(x) for x in row] == [0.0, 1.0, 0.0]


def test_polyhedron_snapshot_exports_surface_triangles(tmp_path, cube_mesh):
    lines = _sections(write_vtk(tmp_path / "cube.vtk", cube_mesh, np.zeros(24)))
    assert "CELLS 12 48" in lines
    start = lines.index("CELL_TYPES 12") + 1
    assert lines[start:start + 12] == ["5"] * 12
    start = lines.index("LOOKUP_TABLE default") + 1
    assert lines[start:start + 12] == ["0"] * 12


def test_summary_round_trip(tmp_path):
    summary = RunSummary(name="bar", analysis="dynamic", dimension=2, n_nodes=4, n_elements=1, n_dofs=8,
                         kinetic_energy=[1.0, 0.5], strain_energy=[0.0, 0.7], external_work=[0.0, 0.1])
    loaded = read_summary(write_summary(tmp_path / "summary.json", summary))
    assert loaded == summary
    assert loaded.total_energy == pytest.approx([1.0, 1.1])
