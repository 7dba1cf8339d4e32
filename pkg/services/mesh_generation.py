"""
Mesh generators: structured serendipity-layout meshes, clipped 2D Voronoi
meshes and non-convex chevron ("C") meshes, plus boundary-set extraction.
"""
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from config import Config
from models.fem_models import BoundarySet, Mesh, PolytopalElement, facet_key
from services.geometry import is_convex_polygon, signed_area
from utils.constants import COOK_CORNERS
from utils.errors import DuplicateSeeds, GeometryError
from utils.logger import app_logger

# Hexahedron faces as corner offsets (a, b, c), outward orientation
HEX_FACES = (
    ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)),  # zmin
    ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)),  # zmax
    ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)),  # ymin
    ((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)),  # ymax
    ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)),  # xmin
    ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)),  # xmax
)

SIDE_NAMES = ("x", "y", "z")


class _NodeRegistry:
    """Assigns node ids to integer grid keys in order of first appearance."""

    def __init__(self):
        self.ids: Dict[Tuple[int, ...], int] = {}
        self.keys: List[Tuple[int, ...]] = []

    def __call__(self, key: Tuple[int, ...]) -> int:
        if key not in self.ids:
            self.ids[key] = len(self.keys)
            self.keys.append(key)
        return self.ids[key]


def _bilinear(corners: np.ndarray, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    n = np.stack([(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t], axis=-1)
    return n @ corners


def _grid_coordinates(keys: np.ndarray, divisions: Sequence[int], box, corners, step: int) -> np.ndarray:
    """Map integer grid keys (in units of 1/step cell) to physical coordinates."""
    span = np.asarray(divisions, dtype=float) * step
    param = keys / span
    if corners is not None:
        return _bilinear(np.asarray(corners, dtype=float), param[:, 0], param[:, 1])
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    return lo + param * (hi - lo)


def _hex_faces(cx: int, cy: int, cz: int, serendipity: bool, registry: _NodeRegistry) -> Tuple[Tuple[int, ...], ...]:
    faces = []
    for face in HEX_FACES:
        keys = [(2 * (cx + a), 2 * (cy + b), 2 * (cz + c)) for a, b, c in face]
        loop = []
        for k, key in enumerate(keys):
            loop.append(registry(key))
            if serendipity:
                nxt = keys[(k + 1) % 4]
                loop.append(registry(tuple((p + q) // 2 for p, q in zip(key, nxt))))
        faces.append(tuple(loop))
    return tuple(faces)


def generate_structured(kind: str, divisions: Sequence[int], box=None, corners=None) -> Mesh:
    """
    Structured mesh of quadrilateral or hexahedral cells, each stored as a
    polygon or polyhedron.

    Args:
        kind: "q2s" (8-node loops), "q1" (4-node loops), "h2s" (20 nodes,
            8-node faces) or "h1" (8 nodes, 4-node faces)
        divisions: cells per axis
        box: [lower, upper] corners of an axis-aligned box
        corners: four 2D corners of a quadrilateral domain (bilinear map),
            alternative to box

    Returns:
        Mesh with boundary sets for every box side
    """
    kind = kind.lower()
    dims = 3 if kind in ("h2s", "h1") else 2
    if kind not in ("q2s", "q1", "h2s", "h1"):
        raise GeometryError(f"unknown structured mesh kind '{kind}'")
    divisions = [int(n) for n in divisions]
    if len(divisions) != dims or any(n < 1 for n in divisions):
        raise GeometryError(f"{kind} needs {dims} divisions >= 1, got {divisions}")
    if corners is not None and dims == 3:
        raise GeometryError("corners are only supported for 2D meshes")

    registry = _NodeRegistry()
    elements: List[PolytopalElement] = []
    if dims == 2:
        nx, ny = divisions
        for cy in range(ny):
            for cx in range(nx):
                x0, y0 = 2 * cx, 2 * cy
                if kind == "q2s":
                    loop = [(x0, y0), (x0 + 1, y0), (x0 + 2, y0), (x0 + 2, y0 + 1),
                            (x0 + 2, y0 + 2), (x0 + 1, y0 + 2), (x0, y0 + 2), (x0, y0 + 1)]
                else:
                    loop = [(x0, y0), (x0 + 2, y0), (x0 + 2, y0 + 2), (x0, y0 + 2)]
                elements.append(PolytopalElement(tuple(registry(k) for k in loop)))
    else:
        nx, ny, nz = divisions
        for cz in range(nz):
            for cy in range(ny):
                for cx in range(nx):
                    faces = _hex_faces(cx, cy, cz, kind == "h2s", registry)
                    node_ids = tuple(dict.fromkeys(v for face in faces for v in face))
                    elements.append(PolytopalElement(node_ids, faces))

    keys = np.asarray(registry.keys, dtype=float)
    coordinates = _grid_coordinates(keys, divisions, box, corners, step=2)
    mesh = Mesh(dims, coordinates, elements)
    mesh.boundary_sets = boundary_sets_from_box(mesh)
    app_logger.debug(f"Generated {kind} mesh: {mesh.n_nodes} nodes, {mesh.n_elements} elements")
    return mesh


def _merge_points(points: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Merge points closer than tol.

    Returns:
        (unique_points, index map raw -> unique) with ids in first-appearance order
    """
    parent = np.arange(points.shape[0])

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(cKDTree(points).query_pairs(tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(points.shape[0])])
    order: Dict[int, int] = {}
    mapping = np.empty(points.shape[0], dtype=np.int64)
    for i, r in enumerate(roots):
        if r not in order:
            order[r] = len(order)
        mapping[i] = order[r]
    unique = np.zeros((len(order), points.shape[1]))
    for r, k in order.items():
        unique[k] = points[r]
    return unique, mapping


def _mesh_from_loops(raw_points: np.ndarray, loops: List[List[int]], tol: float) -> Mesh:
    """Build a 2D mesh from polygon loops over raw points, merging duplicates."""
    used = sorted({i for loop in loops for i in loop})
    remap = {old: new for new, old in enumerate(used)}
    pts = raw_points[used]
    unique, mapping = _merge_points(pts, tol)
    elements = []
    for loop in loops:
        ids = [int(mapping[remap[i]]) for i in loop]
        cleaned = [v for k, v in enumerate(ids) if v != ids[k - 1]]
        if signed_area(unique[cleaned]) < 0:
            cleaned = cleaned[::-1]
        elements.append(PolytopalElement(tuple(cleaned)))
    # renumber nodes by first appearance in element order
    order = list(dict.fromkeys(v for e in elements for v in e.node_ids))
    renum = {old: new for new, old in enumerate(order)}
    elements = [PolytopalElement(tuple(renum[v] for v in e.node_ids), tag=e.tag) for e in elements]
    mesh = Mesh(2, unique[order], elements)
    mesh.boundary_sets = boundary_sets_from_box(mesh)
    return mesh


def generate_voronoi_2d(seeds, box) -> Mesh:
    """
    Voronoi tessellation of a rectangle, clipped by mirroring the seeds across
    the four sides so that the cells of the original seeds end on the box.

    Args:
        seeds: (n, 2) seed points strictly inside the box
        box: [[xmin, ymin], [xmax, ymax]]

    Raises:
        DuplicateSeeds: two seeds closer than the duplicate-node tolerance
    """
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 2)
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    diag = float(np.linalg.norm(hi - lo))
    tol = Config.DUPLICATE_NODE_TOL * diag
    if seeds.shape[0] < 1:
        raise GeometryError("voronoi mesh needs at least one seed")
    if np.any(seeds <= lo) or np.any(seeds >= hi):
        raise GeometryError("voronoi seeds must lie strictly inside the box")
    if seeds.shape[0] > 1 and cKDTree(seeds).query_pairs(tol):
        raise DuplicateSeeds("voronoi seeds are not pairwise distinct")

    mirrored = [seeds]
    for axis in range(2):
        for bound in (lo[axis], hi[axis]):
            copy = seeds.copy()
            copy[:, axis] = 2.0 * bound - copy[:, axis]
            mirrored.append(copy)
    vor = Voronoi(np.vstack(mirrored))

    vertices = np.clip(vor.vertices, lo, hi)
    loops = []
    for k in range(seeds.shape[0]):
        region = vor.regions[vor.point_region[k]]
        if -1 in region or len(region) < 3:
            raise GeometryError(f"voronoi cell of seed {k} is unbounded")
        loops.append(list(region))
    mesh = _mesh_from_loops(vertices, loops, tol)
    app_logger.debug(f"Generated voronoi mesh: {mesh.n_elements} cells, {mesh.n_nodes} nodes")
    return mesh


def random_seeds(n_seeds: int, box, random_seed: int = 0) -> np.ndarray:
    """Uniform random seeds strictly inside a box."""
    rng = np.random.default_rng(random_seed)
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    margin = 1e-3 * (hi - lo)
    return rng.uniform(lo + margin, hi - margin, size=(n_seeds, 2))


def generate_cmesh(divisions: Sequence[int], box, shift: Optional[float] = None) -> Mesh:
    """
    Mesh of chevron-shaped ("C") cells whose centroid lies outside the cell.

    Each interior cell of bottom width w is (k,0),(k+w,0),(k+w-s,h/2),(k+w,h),
    (k,h),(k-s,h/2) in row coordinates; with s > w the centroid falls into the
    notch. The first cell has a straight left side, the last a straight right
    side. Rows are stacked along y.

    Args:
        divisions: (cells along x, rows along y), at least 2 cells along x
        box: [[xmin, ymin], [xmax, ymax]]
        shift: chevron offset s (default 1.5 w)
    """
    nx, ny = (int(n) for n in divisions)
    if nx < 2 or ny < 1:
        raise GeometryError(f"cmesh needs at least 2 x 1 divisions, got {divisions}")
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    length, height = hi - lo
    if shift is None:
        width = length / (nx + 1.5)
        shift = 1.5 * width
    else:
        width = (length - shift) / nx
    if width <= 0:
        raise GeometryError(f"cmesh shift {shift} leaves no room for {nx} cells")
    h = height / ny

    raw: List[Tuple[float, float]] = []
    loops: List[List[int]] = []

    def add(points):
        start = len(raw)
        raw.extend(points)
        loops.append(list(range(start, start + len(points))))

    for row in range(ny):
        y0 = lo[1] + row * h
        mid, top = y0 + 0.5 * h, y0 + h
        x0 = lo[0]
        first = x0 + shift + width
        add([(x0, y0), (first, y0), (first - shift, mid), (first, top), (x0, top)])
        for c in range(nx - 2):
            k = first + c * width
            add([(k, y0), (k + width, y0), (k + width - shift, mid), (k + width, top), (k, top), (k - shift, mid)])
        k = first + (nx - 2) * width
        add([(k, y0), (hi[0], y0), (hi[0], top), (k, top), (k - shift, mid)])

    tol = Config.DUPLICATE_NODE_TOL * float(np.linalg.norm(hi - lo))
    mesh = _mesh_from_loops(np.asarray(raw), loops, tol)
    app_logger.debug(f"Generated C-mesh: {mesh.n_elements} cells, shift {shift:.4g}, width {width:.4g}")
    return mesh


def _line_facets(mesh: Mesh, facets, node_set) -> List[Tuple[int, int]]:
    lines = {}
    for facet in facets:
        n = len(facet)
        for k in range(n):
            a, b = facet[k], facet[(k + 1) % n]
            if a in node_set and b in node_set:
                lines.setdefault(facet_key((a, b)), (a, b))
    return list(lines.values())


def boundary_sets_from_box(mesh: Mesh) -> Dict[str, BoundarySet]:
    """
    Node and facet sets on the sides of the bounding box.

    Sets are named xmin, xmax, ymin, ymax (zmin, zmax); 3D meshes also get the
    line sets where two sides meet (e.g. xmax_zmax) with 2-node facets, and
    every mesh gets 'boundary' with all boundary facets.
    """
    lo, hi = mesh.bounding_box()
    tol = Config.DUPLICATE_NODE_TOL * 1e2 * mesh.bbox_diagonal
    boundary = mesh.boundary_facets()
    sets: Dict[str, BoundarySet] = {}
    side_nodes: Dict[str, set] = {}
    side_facets: Dict[str, list] = {}
    for axis in range(mesh.dimension):
        for label, bound in (("min", lo[axis]), ("max", hi[axis])):
            name = f"{SIDE_NAMES[axis]}{label}"
            nodes = np.flatnonzero(np.abs(mesh.coordinates[:, axis] - bound) <= tol)
            node_set = set(int(n) for n in nodes)
            facets = [f for f in boundary if all(v in node_set for v in f)]
            side_nodes[name] = node_set
            side_facets[name] = facets
            sets[name] = BoundarySet(name, tuple(sorted(node_set)), tuple(tuple(f) for f in facets))
    if mesh.dimension == 3:
        names = list(side_nodes)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                if a[0] == b[0]:
                    continue
                common = side_nodes[a] & side_nodes[b]
                if not common:
                    continue
                name = f"{a}_{b}"
                lines = _line_facets(mesh, side_facets[a], common)
                sets[name] = BoundarySet(name, tuple(sorted(common)), tuple(lines))
    all_nodes = sorted({v for f in boundary for v in f})
    sets["boundary"] = BoundarySet("boundary", tuple(all_nodes), tuple(tuple(f) for f in boundary))
    return sets


def cook_mesh(level: int, kind: str = "q2s") -> Mesh:
    """Cook's tapered panel with 2^level cells per side."""
    n = 2 ** int(level)
    return generate_structured(kind, (n, n), corners=COOK_CORNERS)


def mesh_statistics(mesh: Mesh) -> dict:
    """Counts used for run logging."""
    histogram = Counter(e.n_nodes for e in mesh.elements)
    stats = {
        "dimension": mesh.dimension,
        "nodes": mesh.n_nodes,
        "elements": mesh.n_elements,
        "nodes_per_element": {str(k): v for k, v in sorted(histogram.items())},
    }
    if mesh.dimension == 2:
        stats["non_convex"] = sum(
            1 for e in mesh.elements if not is_convex_polygon(mesh.coordinates[list(e.node_ids)])
        )
    return stats
