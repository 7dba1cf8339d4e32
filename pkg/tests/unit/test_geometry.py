import numpy as np
import pytest

from models.fem_models import PolytopalElement, SurfaceTriangle
from services.geometry import (
    ear_clip,
    face_geometry,
    is_convex_polygon,
    nearest_node,
    newell_normal,
    polygon_area_centroid,
    polygon_moments,
    polyhedron_volume_centroid,
    signed_area,
    simplex_measures,
    subdivide_element,
    subdivide_polygon,
    subdivide_polyhedron,
    triangulate_faces,
)
from services.mesh_generation import generate_structured
from tests.fixtures.geometry import (
    C_POLYGON,
    C_POLYGON_AREA,
    C_POLYGON_CENTROID,
    CUBE,
    CUBE_FACES,
    PENTAGON,
    SERENDIPITY_SQUARE,
    UNIT_SQUARE,
    UNIT_TETRAHEDRON,
    UNIT_TETRAHEDRON_FACES,
    UNIT_TRIANGLE,
    polygon_mesh,
)
from utils.errors import (
    DegenerateElement,
    DegenerateTriangle,
    FaceTooSmall,
    NonClosedSurface,
    OrientationError,
)

pytestmark = pytest.mark.unit


def _triangle(points):
    points = np.asarray(points, dtype=float)
    return SurfaceTriangle(points, (0, 1, 2), 0)


@pytest.mark.parametrize("loop, area, centroid", [
    (UNIT_SQUARE, 1.0, (0.5, 0.5)),
    (UNIT_TRIANGLE, 0.5, (1.0 / 3.0, 1.0 / 3.0)),
    (C_POLYGON, C_POLYGON_AREA, C_POLYGON_CENTROID),
])
def test_polygon_area_centroid(loop, area, centroid):
    measured, c = polygon_area_centroid(loop)
    assert measured == pytest.approx(area, rel=1e-14)
    np.testing.assert_allclose(c, centroid, rtol=1e-13)


def test_c_polygon_centroid_matches_raster_oracle():
    """Given the non-convex C polygon, the shoelace centroid agrees with a fine raster estimate."""
    n = 600
    h = 3.0 / n
    x, y = np.meshgrid((np.arange(n) + 0.5) * h, (np.arange(n) + 0.5) * h, indexing="ij")
    notch = (x > 1.0) & (y > 1.0) & (y < 2.0)
    inside = ~notch
    raster = np.array([x[inside].mean(), y[inside].mean()])
    _, c = polygon_area_centroid(C_POLYGON)
    np.testing.assert_allclose(c, raster, rtol=1e-3)


def test_c_polygon_centroid_lies_outside():
    cx, cy = polygon_area_centroid(C_POLYGON)[1]
    assert 1.0 < cx < 3.0 and 1.0 < cy < 2.0


def test_clockwise_loop_raises_orientation_error():
    with pytest.raises(OrientationError):
        polygon_area_centroid(UNIT_SQUARE[::-1])
    assert signed_area(np.asarray(UNIT_SQUARE[::-1])) == pytest.approx(-1.0)


@pytest.mark.parametrize("loop", [
    [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
    [[0.0, 0.0], [1.0, 1.0]],
])
def test_degenerate_polygon_raises(loop):
    with pytest.raises(DegenerateElement):
        polygon_area_centroid(loop)


def test_polygon_moments_of_unit_square():
    m0, m1, m2 = polygon_moments(UNIT_SQUARE)
    assert m0 == pytest.approx(1.0)
    np.testing.assert_allclose(m1, [0.5, 0.5], rtol=1e-14)
    np.testing.assert_allclose(m2, [[1.0 / 3.0, 0.25], [0.25, 1.0 / 3.0]], rtol=1e-14)


def test_polygon_moments_parallel_axis_identity():
    """Second moments about the centroid are the same for a shifted polygon."""
    loop = np.asarray(PENTAGON)
    m0, m1, m2 = polygon_moments(loop)
    s0, s1, s2 = polygon_moments(loop + np.array([3.0, -2.0]))
    central = m2 - np.outer(m1, m1) / m0
    shifted_central = s2 - np.outer(s1, s1) / s0
    np.testing.assert_allclose(shifted_central, central, rtol=1e-12)


def test_convexity():
    assert is_convex_polygon(UNIT_SQUARE)
    assert is_convex_polygon(SERENDIPITY_SQUARE)
    assert not is_convex_polygon(C_POLYGON)


def test_newell_normal_of_planar_square():
    loop = np.column_stack([np.asarray(UNIT_SQUARE), np.zeros(4)])
    np.testing.assert_allclose(newell_normal(loop), [0.0, 0.0, 1.0])


@pytest.mark.parametrize("points, normal, jacobian", [
    ([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]], [0.0, 0.0, 1.0], 1.0),
    ([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.0]], [0.0, 0.0, 1.0], 4.0),
])
def test_face_geometry(points, normal, jacobian):
    N, N_zeta = face_geometry(_triangle(points))
    np.testing.assert_allclose(N, normal, atol=1e-15)
    assert N_zeta == pytest.approx(jacobian)


def test_face_geometry_of_tilted_triangle(rng):
    points = rng.uniform(-1.0, 1.0, size=(3, 3))
    N, N_zeta = face_geometry(_triangle(points))
    cross = np.cross(points[0] - points[2], points[1] - points[2])
    np.testing.assert_allclose(N, cross / np.linalg.norm(cross), rtol=1e-13)
    assert N_zeta == pytest.approx(np.linalg.norm(cross))
    assert np.linalg.norm(N) == pytest.approx(1.0)


def test_collinear_triangle_raises():
    with pytest.raises(DegenerateTriangle):
        face_geometry(_triangle([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))


def test_triangulate_quad_faces():
    element = PolytopalElement(tuple(range(8)), CUBE_FACES)
    triangles = triangulate_faces(element, np.asarray(CUBE))
    assert len(triangles) == 12
    assert not any(t.degenerate for t in triangles)


def test_triangulate_serendipity_faces(serendipity_cube_mesh):
    """Given 8-node faces, every face gives 6 triangles and the flagged ones carry no area."""
    element = serendipity_cube_mesh.elements[0]
    X = serendipity_cube_mesh.coordinates
    triangles = triangulate_faces(element, X)
    assert len(triangles) == 36
    for t in (t for t in triangles if t.degenerate):
        a, b, c = t.vertices
        assert np.linalg.norm(np.cross(b - a, c - a)) < 1e-12
    total = sum(0.5 * np.linalg.norm(np.cross(t.vertices[1] - t.vertices[0], t.vertices[2] - t.vertices[0]))
                for t in triangles)
    assert total == pytest.approx(6.0)


def test_closed_surface_identity(serendipity_cube_mesh):
    """Sum of the face area vectors of a closed polyhedron vanishes."""
    element = serendipity_cube_mesh.elements[0]
    total = np.zeros(3)
    for tri in triangulate_faces(element, serendipity_cube_mesh.coordinates):
        a, b, c = tri.vertices
        total += 0.5 * np.cross(a - c, b - c)
    np.testing.assert_allclose(total, 0.0, atol=1e-12)


def test_triangulate_pentagonal_face_matches_newell_area():
    angles = np.linspace(0.0, 2.0 * np.pi, 6)[:-1]
    top = np.column_stack([np.cos(angles), np.sin(angles), np.ones(5)])
    bottom = top.copy()
    bottom[:, 2] = 0.0
    points = np.vstack([bottom, top])
    faces = [tuple(range(4, -1, -1)), tuple(range(5, 10))]
    faces += [(k, (k + 1) % 5, 5 + (k + 1) % 5, 5 + k) for k in range(5)]
    element = PolytopalElement(tuple(range(10)), tuple(faces))
    triangles = [t for t in triangulate_faces(element, points) if t.face_id == 1]
    assert len(triangles) == 3
    area = sum(face_geometry(t)[1] / 2.0 for t in triangles)
    assert area == pytest.approx(np.linalg.norm(newell_normal(top)), rel=1e-12)


def test_triangulate_rejects_small_face():
    element = PolytopalElement((0, 1, 2), ((0, 1),))
    with pytest.raises(FaceTooSmall):
        triangulate_faces(element, np.asarray(UNIT_TETRAHEDRON))


@pytest.mark.parametrize("points, faces, volume, centroid", [
    (CUBE, CUBE_FACES, 1.0, (0.5, 0.5, 0.5)),
    (UNIT_TETRAHEDRON, UNIT_TETRAHEDRON_FACES, 1.0 / 6.0, (0.25, 0.25, 0.25)),
])
def test_polyhedron_volume_centroid(points, faces, volume, centroid):
    element = PolytopalElement(tuple(range(len(points))), faces)
    measured, c = polyhedron_volume_centroid(element, np.asarray(points))
    assert measured == pytest.approx(volume, rel=1e-14)
    np.testing.assert_allclose(c, centroid, rtol=1e-13)


def test_serendipity_hexahedron_volume():
    mesh = generate_structured("h2s", (1, 1, 1), [[0.0, 0.0, 0.0], [2.0, 1.0, 1.0]])
    volume, centroid = polyhedron_volume_centroid(mesh.elements[0], mesh.coordinates)
    assert mesh.elements[0].n_nodes == 20
    assert volume == pytest.approx(2.0, rel=1e-14)
    np.testing.assert_allclose(centroid, [1.0, 0.5, 0.5], rtol=1e-13)


def test_open_surface_raises():
    element = PolytopalElement(tuple(range(8)), CUBE_FACES[:-1])
    with pytest.raises(NonClosedSurface):
        polyhedron_volume_centroid(element, np.asarray(CUBE))


def test_inward_faces_give_degenerate_volume():
    faces = tuple(tuple(reversed(f)) for f in CUBE_FACES)
    element = PolytopalElement(tuple(range(8)), faces)
    with pytest.raises(DegenerateElement):
        polyhedron_volume_centroid(element, np.asarray(CUBE))


def test_subdivide_unit_square():
    triangles = subdivide_polygon(UNIT_SQUARE)
    loop = np.asarray(UNIT_SQUARE)
    assert len(triangles) == 2
    np.testing.assert_allclose([signed_area(loop[list(t)]) for t in triangles], [0.5, 0.5])


def test_subdivide_serendipity_square_drops_collinear_triangles():
    loop = np.asarray(SERENDIPITY_SQUARE)
    triangles = subdivide_polygon(loop)
    areas = np.array([signed_area(loop[list(t)]) for t in triangles])
    assert np.all(areas > 0.0)
    assert areas.sum() == pytest.approx(1.0, rel=1e-12)
    assert {k for t in triangles for k in t} == set(range(8))


def test_subdivide_c_polygon():
    loop = np.asarray(C_POLYGON)
    triangles = subdivide_polygon(loop)
    areas = np.array([signed_area(loop[list(t)]) for t in triangles])
    assert np.all(areas > 0.0)
    assert areas.sum() == pytest.approx(C_POLYGON_AREA, rel=1e-12)
    assert {k for t in triangles for k in t} == set(range(8))


def test_ear_clip_c_polygon():
    loop = np.asarray(C_POLYGON)
    triangles = ear_clip(loop)
    assert len(triangles) == 6
    assert sum(signed_area(loop[list(t)]) for t in triangles) == pytest.approx(C_POLYGON_AREA, rel=1e-12)


def test_subdivide_cube_from_lowest_vertex():
    element = PolytopalElement(tuple(range(8)), CUBE_FACES)
    tets = subdivide_polyhedron(element, np.asarray(CUBE))
    assert len(tets) == 6
    assert all(tet[0] == 0 for tet in tets)
    volumes = simplex_measures(np.asarray(CUBE)[np.asarray(tets)])
    assert np.all(volumes > 0.0)
    assert volumes.sum() == pytest.approx(1.0, rel=1e-12)


def test_subdivide_serendipity_hexahedron_uses_every_node(serendipity_cube_mesh):
    simplices = subdivide_element(serendipity_cube_mesh.elements[0], serendipity_cube_mesh)
    volumes = simplex_measures(serendipity_cube_mesh.coordinates[simplices])
    assert np.all(volumes > 0.0)
    assert volumes.sum() == pytest.approx(1.0, rel=1e-10)
    assert set(simplices.ravel().tolist()) == set(range(20))


def test_subdivide_element_returns_global_ids():
    mesh = generate_structured("q2s", (2, 1), [[0.0, 0.0], [2.0, 1.0]])
    for element in mesh.elements:
        simplices = subdivide_element(element, mesh)
        assert set(simplices.ravel().tolist()) == set(element.node_ids)
        assert simplex_measures(mesh.coordinates[simplices]).sum() == pytest.approx(1.0, rel=1e-12)


def test_nearest_node():
    mesh = polygon_mesh(PENTAGON)
    assert nearest_node(mesh, [2.4, 1.1]) == 2
