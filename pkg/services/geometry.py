"""
Geometric kernels for polygons and polyhedra: measures, centroids, moments,
face triangulation and simplex subdivision.

All functions are pure; coordinates are taken in the initial configuration.
"""
from collections import Counter
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from config import Config
from models.fem_models import Mesh, PolytopalElement, SurfaceTriangle
from utils.errors import (
    DegenerateElement,
    DegenerateTriangle,
    FaceTooSmall,
    GeometryError,
    NonClosedSurface,
    OrientationError,
    SubdivisionFailed,
)


def _bbox_scale(points: np.ndarray) -> float:
    extent = points.max(axis=0) - points.min(axis=0)
    return float(np.linalg.norm(extent))


def _shoelace_terms(loop: np.ndarray):
    x, y = loop[:, 0], loop[:, 1]
    xp, yp = np.roll(x, 1), np.roll(y, 1)
    cross = xp * y - x * yp
    return x, y, xp, yp, cross


def signed_area(loop: np.ndarray) -> float:
    """Signed area of a 2D loop (positive for counter-clockwise)."""
    *_, cross = _shoelace_terms(np.asarray(loop, dtype=float))
    return 0.5 * float(cross.sum())


def polygon_area_centroid(loop) -> Tuple[float, np.ndarray]:
    """
    Area and centroid of a simple polygon.

    Args:
        loop: (n, 2) ordered vertex coordinates, counter-clockwise

    Returns:
        (area, centroid)

    Raises:
        DegenerateElement: area below 1e-14 * bbox^2
        OrientationError: clockwise loop
    """
    loop = np.asarray(loop, dtype=float)
    if loop.shape[0] < 3:
        raise DegenerateElement(f"polygon needs at least 3 vertices, got {loop.shape[0]}")
    x, y, xp, yp, cross = _shoelace_terms(loop)
    area = 0.5 * cross.sum()
    if abs(area) < Config.DEGENERATE_TOL * _bbox_scale(loop) ** 2:
        raise DegenerateElement(f"polygon area {area:.3e} below tolerance")
    if area < 0:
        raise OrientationError(f"polygon loop is clockwise (signed area {area:.6e})")
    cx = ((xp + x) * cross).sum() / (6.0 * area)
    cy = ((yp + y) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy])


def polygon_moments(loop) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Exact monomial moments of a polygon from its boundary vertices.

    Uses the wrap-around convention x_0 = x_n:
        int 1  = 1/2  sum (x_{i-1} y_i - x_i y_{i-1})
        int x  = 1/6  sum (x_{i-1} + x_i) c_i
        int x2 = 1/12 sum (x_{i-1}^2 + x_{i-1} x_i + x_i^2) c_i
        int xy = 1/24 sum (x_{i-1} y_i + 2 x_{i-1} y_{i-1} + 2 x_i y_i + x_i y_{i-1}) c_i

    Returns:
        (m0, m1, m2): int 1, int X (2,), int X X^T (2, 2)
    """
    loop = np.asarray(loop, dtype=float)
    x, y, xp, yp, c = _shoelace_terms(loop)
    m0 = 0.5 * c.sum()
    m1 = np.array([((xp + x) * c).sum(), ((yp + y) * c).sum()]) / 6.0
    ixx = ((xp ** 2 + xp * x + x ** 2) * c).sum() / 12.0
    iyy = ((yp ** 2 + yp * y + y ** 2) * c).sum() / 12.0
    ixy = ((xp * y + 2.0 * xp * yp + 2.0 * x * y + x * yp) * c).sum() / 24.0
    m2 = np.array([[ixx, ixy], [ixy, iyy]])
    return float(m0), m1, m2


def is_convex_polygon(loop) -> bool:
    """Whether every turn of the loop is counter-clockwise (within tolerance)."""
    loop = np.asarray(loop, dtype=float)
    edges = np.roll(loop, -1, axis=0) - loop
    turns = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
    return bool(np.all(turns >= -Config.CONVEXITY_TOL * _bbox_scale(loop) ** 2))


def newell_normal(loop) -> np.ndarray:
    """Area vector of a (possibly non-planar) 3D loop; its norm is the planar area."""
    loop = np.asarray(loop, dtype=float)
    nxt = np.roll(loop, -1, axis=0)
    return 0.5 * np.cross(loop, nxt).sum(axis=0)


def face_geometry(tri: SurfaceTriangle, xi: float = 1.0 / 3.0, eta: float = 1.0 / 3.0) -> Tuple[np.ndarray, float]:
    """
    Unit normal and area Jacobian of a surface triangle.

    The triangle is parametrized by X = xi X_a + eta X_b + (1 - xi - eta) X_c,
    so g_xi = X_a - X_c, g_eta = X_b - X_c and g_zeta = g_xi x g_eta (constant
    over the triangle).

    Returns:
        (N, N_zeta) with N = g_zeta / |g_zeta| and N_zeta = |g_zeta|

    Raises:
        DegenerateTriangle: N_zeta below tolerance
    """
    a, b, c = np.asarray(tri.vertices, dtype=float)
    g_zeta = np.cross(a - c, b - c)
    n_zeta = float(np.linalg.norm(g_zeta))
    scale = _bbox_scale(np.asarray(tri.vertices, dtype=float))
    if n_zeta <= Config.DEGENERATE_TOL * max(scale, 1e-300) ** 2:
        raise DegenerateTriangle(f"triangle {tri.node_ids} of face {tri.face_id} has zero area")
    return g_zeta / n_zeta, n_zeta


def _check_faces(faces: Sequence[Sequence[int]]) -> None:
    directed = Counter()
    for face in faces:
        if len(face) < 3:
            raise FaceTooSmall(f"face {tuple(face)} has fewer than 3 nodes")
        n = len(face)
        for k in range(n):
            directed[(face[k], face[(k + 1) % n])] += 1
    for (i, j), count in directed.items():
        if count != 1 or directed.get((j, i), 0) != 1:
            raise NonClosedSurface(f"edge ({i}, {j}) is not paired with exactly one opposite edge")


def triangulate_faces(element: PolytopalElement, coordinates: np.ndarray) -> List[SurfaceTriangle]:
    """
    Fan-triangulate every face of a polyhedron from its lowest node id, so
    that the two elements sharing a face split it the same way.

    Collinear triangles (serendipity mid-edge nodes) are kept and flagged.

    Raises:
        FaceTooSmall: a face with fewer than 3 nodes
    """
    if element.faces is None:
        raise GeometryError("triangulate_faces applies to polyhedral elements")
    triangles = []
    for face_id, face in enumerate(element.faces):
        if len(face) < 3:
            raise FaceTooSmall(f"face {face_id} has {len(face)} nodes")
        start = int(np.argmin(face))
        face = tuple(face[start:]) + tuple(face[:start])
        face_pts = coordinates[list(face)]
        ref = Config.DEGENERATE_TOL * _bbox_scale(face_pts) ** 2
        for k in range(1, len(face) - 1):
            ids = (face[0], face[k], face[k + 1])
            verts = coordinates[list(ids)]
            area2 = np.linalg.norm(np.cross(verts[1] - verts[0], verts[2] - verts[0]))
            triangles.append(SurfaceTriangle(verts, ids, face_id, degenerate=bool(area2 <= ref)))
    return triangles


def polyhedron_volume_centroid(element: PolytopalElement, coordinates: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Volume and centroid of a polyhedron by the divergence theorem over the
    fan-triangulated faces.

    Raises:
        NonClosedSurface: face edges do not pair up with opposite orientation
        DegenerateElement: volume below tolerance
    """
    _check_faces(element.faces)
    pts = coordinates[list(element.node_ids)]
    ref = pts[0]
    volume = 0.0
    moment = np.zeros(3)
    for tri in triangulate_faces(element, coordinates):
        a, b, c = tri.vertices - ref
        v = np.dot(a, np.cross(b, c)) / 6.0
        volume += v
        moment += v * (a + b + c) / 4.0
    if volume <= Config.DEGENERATE_TOL * _bbox_scale(pts) ** 3:
        raise DegenerateElement(f"polyhedron volume {volume:.3e} below tolerance")
    return float(volume), ref + moment / volume


def element_measure_centroid(element: PolytopalElement, mesh: Mesh) -> Tuple[float, np.ndarray]:
    """Area (2D) or volume (3D) and centroid of a mesh element."""
    if mesh.dimension == 2:
        return polygon_area_centroid(mesh.coordinates[list(element.node_ids)])
    return polyhedron_volume_centroid(element, mesh.coordinates)


def simplex_measures(vertices: np.ndarray) -> np.ndarray:
    """Signed measures of a batch of simplices, vertices shape (m, d+1, d)."""
    vertices = np.asarray(vertices, dtype=float)
    d = vertices.shape[-1]
    jac = vertices[:, 1:, :] - vertices[:, :1, :]
    return np.linalg.det(jac) / (2.0 if d == 2 else 6.0)


def _point_in_triangle(p, a, b, c, tol) -> bool:
    def cross(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])
    return cross(a, b, p) >= -tol and cross(b, c, p) >= -tol and cross(c, a, p) >= -tol


def ear_clip(loop) -> List[Tuple[int, int, int]]:
    """
    Ear-clipping triangulation of a simple counter-clockwise polygon.

    Collinear vertices are never clipped as the tip of a zero-area ear, so
    every vertex ends up in some positive triangle.

    Returns:
        list of local index triples
    """
    loop = np.asarray(loop, dtype=float)
    remaining = list(range(loop.shape[0]))
    tol = Config.DEGENERATE_TOL * _bbox_scale(loop) ** 2
    triangles = []
    guard = 0
    while len(remaining) > 3:
        n = len(remaining)
        clipped = False
        for k in range(n):
            i, j, l = remaining[k - 1], remaining[k], remaining[(k + 1) % n]
            a, b, c = loop[i], loop[j], loop[l]
            area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if area2 <= tol:
                continue
            if any(_point_in_triangle(loop[m], a, b, c, tol) for m in remaining if m not in (i, j, l)):
                continue
            triangles.append((i, j, l))
            remaining.pop(k)
            clipped = True
            break
        guard += 1
        if not clipped or guard > loop.shape[0] ** 2:
            raise SubdivisionFailed("ear clipping found no ear; polygon is not simple")
    triangles.append(tuple(remaining))
    return triangles


def _fan(n: int, apex: int) -> List[Tuple[int, int, int]]:
    return [(apex, (apex + j) % n, (apex + j + 1) % n) for j in range(1, n - 1)]


def subdivide_polygon(loop) -> List[Tuple[int, int, int]]:
    """
    Triangulate a polygon using only its vertices, every vertex covered.

    Fans are tried from vertex 0, 1, ...; zero-area triangles are dropped. A fan
    is accepted when no retained triangle is negative and every vertex is used.
    Otherwise the loop is ear-clipped.

    Returns:
        list of local index triples, all with positive area
    """
    loop = np.asarray(loop, dtype=float)
    n = loop.shape[0]
    area, _ = polygon_area_centroid(loop)
    tol = Config.DEGENERATE_TOL * area
    for apex in range(n):
        kept = []
        ok = True
        for tri in _fan(n, apex):
            a = signed_area(loop[list(tri)])
            if a < -tol:
                ok = False
                break
            if a > tol:
                kept.append(tri)
        if ok and len({k for tri in kept for k in tri}) == n:
            return kept
    triangles = ear_clip(loop)
    return [tri for tri in triangles if signed_area(loop[list(tri)]) > tol]


def _canonical_loop(face: Sequence[int]) -> Tuple[Tuple[int, ...], bool]:
    """
    Face loop starting at its lowest node id and walking toward the lower of
    its two neighbors, with a flag telling whether the walk was reversed.
    Both elements sharing a face get the same loop.
    """
    face = tuple(int(v) for v in face)
    start = face.index(min(face))
    loop = face[start:] + face[:start]
    if loop[-1] < loop[1]:
        return (loop[0],) + loop[:0:-1], True
    return loop, False


def _face_covering_triangles(face: Sequence[int], coordinates: np.ndarray) -> List[Tuple[int, int, int]]:
    """
    Triangulate one polyhedron face so that every face node is used. The
    split depends only on the face, not on the element it is read from;
    triangles follow the orientation of the given loop.
    """
    loop, flipped = _canonical_loop(face)
    pts = coordinates[list(loop)]
    normal = newell_normal(pts)
    area = np.linalg.norm(normal)
    unit = normal / area
    tol = Config.DEGENERATE_TOL * area
    n = len(loop)
    triangles = None
    for apex in sorted(range(n), key=lambda i: loop[i]):
        kept = []
        ok = True
        for i, j, k in _fan(n, apex):
            a = 0.5 * np.dot(np.cross(pts[j] - pts[i], pts[k] - pts[i]), unit)
            if a < -tol:
                ok = False
                break
            if a > tol:
                kept.append((loop[i], loop[j], loop[k]))
        if ok and len({v for tri in kept for v in tri}) == n:
            triangles = kept
            break
    if triangles is None:
        # project on the face plane and ear-clip
        axis_u = pts[1] - pts[0]
        axis_u /= np.linalg.norm(axis_u)
        axis_v = np.cross(unit, axis_u)
        planar = np.column_stack([(pts - pts[0]) @ axis_u, (pts - pts[0]) @ axis_v])
        triangles = [(loop[i], loop[j], loop[k]) for i, j, k in ear_clip(planar)]
    if flipped:
        triangles = [(a, c, b) for a, b, c in triangles]
    return triangles


def subdivide_polyhedron(element: PolytopalElement, coordinates: np.ndarray) -> List[Tuple[int, int, int, int]]:
    """
    Tetrahedralize a polyhedron from an apex vertex, using only element nodes.

    Apexes are tried in ascending node id. For each face triangle not containing
    the apex a tetrahedron (apex, triangle) is formed; coplanar ones are dropped.
    The apex is accepted when no tetrahedron is inverted and every node is used.

    Raises:
        SubdivisionFailed: no vertex sees the whole element
    """
    volume, _ = polyhedron_volume_centroid(element, coordinates)
    tol = Config.DEGENERATE_TOL * volume
    face_tris = [tri for face in element.faces for tri in _face_covering_triangles(face, coordinates)]
    all_nodes = set(element.node_ids)
    for apex in sorted(element.node_ids):
        p = coordinates[apex]
        kept = []
        ok = True
        for tri in face_tris:
            if apex in tri:
                continue
            a, b, c = coordinates[list(tri)]
            v = np.dot(a - p, np.cross(b - p, c - p)) / 6.0
            if v < -tol:
                ok = False
                break
            if v > tol:
                kept.append((apex,) + tuple(tri))
        if ok and {v for tet in kept for v in tet} == all_nodes:
            return kept
    raise SubdivisionFailed(f"no apex gives a valid tetrahedralization of element with nodes {element.node_ids[:8]}...")


def subdivide_element(element: PolytopalElement, mesh: Mesh) -> np.ndarray:
    """
    Simplex submesh of an element using only its own nodes.

    Returns:
        (n_simplices, d+1) array of global node ids, positively oriented
    """
    if mesh.dimension == 2:
        ids = np.asarray(element.node_ids)
        local = subdivide_polygon(mesh.coordinates[ids])
        return ids[np.asarray(local, dtype=np.int64)]
    return np.asarray(subdivide_polyhedron(element, mesh.coordinates), dtype=np.int64)


def nearest_node(mesh: Mesh, point) -> Optional[int]:
    """Index of the node closest to a point."""
    _, idx = cKDTree(mesh.coordinates).query(np.asarray(point, dtype=float))
    return int(idx)
