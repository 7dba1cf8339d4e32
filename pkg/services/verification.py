"""
Verification suites: linear patch test, derivative consistency, mass-scheme
agreement and rigid-mode spectrum. Every check returns report rows with the
measured error and its tolerance.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from models.fem_models import MassScheme, Mesh, NewtonSettings, PolytopalElement, StabilizationConfig
from services.assembly import GlobalSystem, null_space_count
from services.dynamics import solve_static
from services.geometry import simplex_measures, subdivide_element
from services.mass import monomial_moments, reference_moments
from services.material import NeoHookean
from services.mesh_generation import generate_cmesh, generate_structured, generate_voronoi_2d, random_seeds
from services.projection import assemble_pi_nabla
from services.stabilization import element_potential, element_static
from utils.logger import app_logger

UNIT_SQUARE = [[0.0, 0.0], [1.0, 1.0]]
UNIT_CUBE = [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]

PATCH_TOL = 1e-9
FD_TOL = 1e-5
FD_AMPLITUDE = 0.05
MASS_EXACT_TOL = 1e-12
MASS_LOW_ORDER_TOL = 1e-13

PATCH_MESHES_2D = ("voronoi", "q2s", "cmesh")
PATCH_MESHES_3D = ("h2s", "h1")
ELEMENT_FAMILIES = ("q2s", "voronoi", "cmesh", "h2s", "h1")


@dataclass
class CheckResult:
    """One row of a verification report."""
    suite: str
    case: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error)) and self.error <= self.tolerance


def format_report(rows: Sequence[CheckResult]) -> str:
    """Fixed-width report table."""
    width = max([len(r.case) for r in rows] + [4])
    lines = [f"{'suite':<6} {'case':<{width}} {'error':>12} {'tolerance':>12}  status"]
    for r in rows:
        lines.append(f"{r.suite:<6} {r.case:<{width}} {r.error:12.3e} {r.tolerance:12.3e}  "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)


def unit_material() -> NeoHookean:
    """Unit-scale material for verification runs."""
    return NeoHookean.from_engineering(1.0, 0.3, 1.0)


def element_mesh(mesh: Mesh, eid: int) -> Mesh:
    """Single element of a mesh as a mesh of its own."""
    element = mesh.elements[eid]
    remap = {old: new for new, old in enumerate(element.node_ids)}
    faces = None
    if element.faces is not None:
        faces = tuple(tuple(remap[v] for v in face) for face in element.faces)
    single = PolytopalElement(tuple(range(element.n_nodes)), faces, element.tag)
    return Mesh(mesh.dimension, mesh.coordinates[list(element.node_ids)].copy(), [single])


def patch_mesh(kind: str, random_seed: int = 0) -> Mesh:
    """Small multi-element meshes with interior nodes."""
    if kind == "voronoi":
        return generate_voronoi_2d(random_seeds(25, UNIT_SQUARE, random_seed), UNIT_SQUARE)
    if kind == "q2s":
        return generate_structured("q2s", (2, 2), UNIT_SQUARE)
    if kind == "cmesh":
        return generate_cmesh((3, 2), [[0.0, 0.0], [3.0, 1.0]])
    if kind in ("h2s", "h1"):
        return generate_structured(kind, (2, 2, 2), UNIT_CUBE)
    raise ValueError(f"unknown patch mesh '{kind}'")


def family_elements(kind: str, random_seed: int = 0, count: int = 1) -> List[Mesh]:
    """Single-element meshes of one element family."""
    if kind == "voronoi":
        mesh = generate_voronoi_2d(random_seeds(max(count, 4), UNIT_SQUARE, random_seed), UNIT_SQUARE)
        return [element_mesh(mesh, e) for e in range(min(count, mesh.n_elements))]
    if kind == "cmesh":
        # middle cell is a full chevron with its centroid outside
        return [element_mesh(generate_cmesh((3, 1), [[0.0, 0.0], [3.0, 1.0]]), 1)]
    if kind == "q2s":
        return [generate_structured("q2s", (1, 1), UNIT_SQUARE)]
    if kind in ("h2s", "h1"):
        return [generate_structured(kind, (1, 1, 1), UNIT_CUBE)]
    raise ValueError(f"unknown element family '{kind}'")


def _boundary_nodes(mesh: Mesh) -> np.ndarray:
    return np.array(sorted({v for f in mesh.boundary_facets() for v in f}), dtype=np.int64)


def affine_patch_error(mesh: Mesh, A: np.ndarray, c: np.ndarray, beta_stat: float,
                       material: Optional[NeoHookean] = None) -> float:
    """
    Prescribe u = c + A X on the boundary, solve static equilibrium starting
    from the affine field at every node and return the largest interior nodal
    error relative to |A| l.
    """
    material = material or unit_material()
    system = GlobalSystem(mesh, material, StabilizationConfig(beta_stat, 0.0))
    d = mesh.dimension
    exact = (c[None, :] + mesh.coordinates @ A.T).ravel()
    boundary = _boundary_nodes(mesh)
    dofs = system.dof_map.dofs(boundary)
    system.add_dirichlet(dofs, exact[dofs])
    scale = np.linalg.norm(A) * mesh.bbox_diagonal
    tol_abs = 1e-12 * material.mu * np.linalg.norm(A) * mesh.bbox_diagonal ** (d - 1)
    u, _ = solve_static(system, 0.0, u0=exact, settings=NewtonSettings(tol_abs=tol_abs, tol_rel=1e-13, max_iter=25))
    interior = system.free
    if interior.size == 0:
        return 0.0
    return float(np.max(np.abs(u[interior] - exact[interior])) / scale)


def element_consistency_error(mesh: Mesh, A: np.ndarray, material: Optional[NeoHookean] = None) -> float:
    """
    Under an affine displacement the consistency and stabilization residuals
    of a polygon coincide (both equal the nodal tractions of the constant
    stress); relative difference of beta = 0 and beta = 1.
    """
    material = material or unit_material()
    element = mesh.elements[0]
    projection = assemble_pi_nabla(element, mesh)
    u_e = (mesh.coordinates[list(element.node_ids)] @ A.T).ravel()
    R_c, _ = element_static(element, mesh, projection, material, u_e, 0.0)
    R_s, _ = element_static(element, mesh, projection, material, u_e, 1.0)
    return float(np.max(np.abs(R_c - R_s)) / np.max(np.abs(R_c)))


def patch_suite(dimension: int = 2, meshes: Optional[Iterable[str]] = None,
                betas: Sequence[float] = (0.2, 0.4, 0.6, 1.0), random_seed: int = 0) -> List[CheckResult]:
    """Linear patch test for every mesh and beta_stat."""
    rng = np.random.default_rng(random_seed)
    kinds = list(meshes) if meshes is not None else list(PATCH_MESHES_2D if dimension == 2 else PATCH_MESHES_3D)
    rows = []
    for kind in kinds:
        mesh = patch_mesh(kind, random_seed)
        d = mesh.dimension
        A = 0.1 * rng.uniform(-1.0, 1.0, size=(d, d))
        c = rng.uniform(-1.0, 1.0, size=d)
        for beta in betas:
            error = affine_patch_error(mesh, A, c, beta)
            rows.append(CheckResult("patch", f"{kind} beta={beta:g}", error, PATCH_TOL))
        if d == 2:
            for k, single in enumerate(family_elements(kind, random_seed)):
                rows.append(CheckResult("patch", f"{kind} element {k} consistency",
                                        element_consistency_error(single, A), PATCH_TOL))
    return rows


def _relative(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


def element_fd_errors(mesh: Mesh, u_e: np.ndarray, beta_stat: float, body_force=None,
                      material: Optional[NeoHookean] = None, h: float = 1e-6) -> Dict[str, float]:
    """
    Central differences of the element potential against the residual, and
    of the residual against the tangent.
    """
    material = material or unit_material()
    element = mesh.elements[0]
    projection = assemble_pi_nabla(element, mesh)
    R, K = element_static(element, mesh, projection, material, u_e, beta_stat, body_force=body_force)
    n = u_e.shape[0]
    R_fd = np.zeros(n)
    K_fd = np.zeros((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        plus = element_potential(element, mesh, projection, material, u_e + e, beta_stat, body_force=body_force)
        minus = element_potential(element, mesh, projection, material, u_e - e, beta_stat, body_force=body_force)
        R_fd[k] = (plus - minus) / (2.0 * h)
        R_plus, _ = element_static(element, mesh, projection, material, u_e + e, beta_stat, body_force=body_force)
        R_minus, _ = element_static(element, mesh, projection, material, u_e - e, beta_stat, body_force=body_force)
        K_fd[:, k] = (R_plus - R_minus) / (2.0 * h)
    return {"residual": _relative(R, R_fd), "tangent": _relative(K, K_fd)}


def global_fd_error(system: GlobalSystem, u: np.ndarray, h: float = 1e-6) -> float:
    """Largest relative deviation of the global tangent from central differences of R."""
    _, R, K = system.internal_forces(u)
    K = K.toarray()
    K_fd = np.zeros_like(K)
    for k in range(system.n_dofs):
        e = np.zeros(system.n_dofs)
        e[k] = h
        _, R_plus, _ = system.internal_forces(u + e)
        _, R_minus, _ = system.internal_forces(u - e)
        K_fd[:, k] = (R_plus - R_minus) / (2.0 * h)
    return _relative(K, K_fd)


def smallest_height(mesh: Mesh) -> float:
    """Smallest simplex height over the submeshes of all elements."""
    d = mesh.dimension
    heights = []
    for element in mesh.elements:
        vertices = mesh.coordinates[subdivide_element(element, mesh)]
        facets = [np.delete(vertices, k, axis=1) for k in range(d + 1)]
        if d == 2:
            sizes = [np.linalg.norm(f[:, 1] - f[:, 0], axis=1) for f in facets]
        else:
            sizes = [0.5 * np.linalg.norm(np.cross(f[:, 1] - f[:, 0], f[:, 2] - f[:, 0]), axis=1) for f in facets]
        heights.append(np.min(d * np.abs(simplex_measures(vertices)) / np.max(sizes, axis=0)))
    return float(min(heights))


def random_state(mesh: Mesh, rng: np.random.Generator, amplitude: float = FD_AMPLITUDE) -> np.ndarray:
    """
    Nodal displacements of at most amplitude times the smallest simplex height.

    The gradient on every simplex stays below (d + 1) sqrt(d) amplitude, so
    for amplitude 0.05 no simplex (and no projected gradient, their average)
    can invert.
    """
    return amplitude * smallest_height(mesh) * rng.uniform(-1.0, 1.0, size=mesh.n_dofs)


def fd_suite(families: Optional[Iterable[str]] = None, n_states: int = 10, beta_stat: float = 0.4,
             random_seed: int = 0) -> List[CheckResult]:
    """Derivative consistency on random states of every element family and a small global mesh."""
    rng = np.random.default_rng(random_seed)
    rows = []
    for kind in (families or ELEMENT_FAMILIES):
        worst = {"residual": 0.0, "tangent": 0.0}
        for mesh in family_elements(kind, random_seed):
            d = mesh.dimension
            for _ in range(n_states):
                u_e = random_state(mesh, rng)
                body_force = rng.uniform(-1.0, 1.0, size=d)
                errors = element_fd_errors(mesh, u_e, beta_stat, body_force)
                for key in worst:
                    worst[key] = max(worst[key], errors[key])
        for key, value in worst.items():
            rows.append(CheckResult("fd", f"{kind} {key}", value, FD_TOL))
    mesh = generate_cmesh((3, 1), [[0.0, 0.0], [3.0, 1.0]])
    system = GlobalSystem(mesh, unit_material(), StabilizationConfig(beta_stat, 0.0))
    u = random_state(mesh, rng)
    rows.append(CheckResult("fd", "global cmesh tangent", global_fd_error(system, u), FD_TOL))
    return rows


def mass_scheme_errors(mesh: Mesh) -> Dict[str, float]:
    """
    Exact monomial moments against degree-4 submesh quadrature, and the
    degree <= 1 moments (first row) of the centroid and subtriangulation
    schemes against the exact ones.
    """
    element = mesh.elements[0]
    projection = assemble_pi_nabla(element, mesh)
    exact = monomial_moments(element, mesh, MassScheme.EXACT, projection)
    reference = reference_moments(element, mesh, 4, projection)
    errors = {"exact": float(np.max(np.abs(exact - reference)) / np.max(np.abs(reference)))}
    for scheme in (MassScheme.CENTROID, MassScheme.SUBTRIANGULATION):
        low = monomial_moments(element, mesh, scheme, projection)
        errors[scheme.value] = float(np.max(np.abs(low[0] - exact[0])) / np.max(np.abs(exact[0])))
    return errors


def mass_suite(n_cells: int = 50, random_seed: int = 0) -> List[CheckResult]:
    """Mass-scheme agreement on random Voronoi cells and structured elements."""
    meshes = family_elements("voronoi", random_seed, n_cells)
    meshes += family_elements("q2s") + family_elements("cmesh") + family_elements("h2s") + family_elements("h1")
    labels = [f"voronoi cell {k}" for k in range(len(meshes) - 4)] + ["q2s", "cmesh", "h2s", "h1"]
    worst: Dict[str, Dict[str, float]] = {}
    for label, mesh in zip(labels, meshes):
        family = label.split(" ")[0]
        for key, value in mass_scheme_errors(mesh).items():
            bucket = worst.setdefault(family, {})
            bucket[key] = max(bucket.get(key, 0.0), value)
    rows = []
    for family, errors in worst.items():
        for key, value in errors.items():
            tol = MASS_EXACT_TOL if key == "exact" else MASS_LOW_ORDER_TOL
            rows.append(CheckResult("mass", f"{family} {key}", value, tol))
    return rows


def rigid_mode_count(mesh: Mesh, beta_stat: float) -> Optional[int]:
    """Zero eigenvalues of the free-floating static tangent at zero displacement."""
    system = GlobalSystem(mesh, unit_material(), StabilizationConfig(beta_stat, 0.0))
    _, _, K = system.internal_forces(np.zeros(system.n_dofs))
    return null_space_count(K)


def rank_suite(families: Optional[Iterable[str]] = None, beta_stat: float = 0.4,
               random_seed: int = 0) -> List[CheckResult]:
    """
    Stabilized elements have exactly the rigid modes as zero-energy modes;
    without stabilization a polytope with more than d + 1 nodes has more.
    """
    rows = []
    for kind in (families or ELEMENT_FAMILIES):
        mesh = family_elements(kind, random_seed)[0]
        d = mesh.dimension
        rigid = d * (d + 1) // 2
        count = rigid_mode_count(mesh, beta_stat)
        rows.append(CheckResult("rank", f"{kind} beta={beta_stat:g} zero modes {count}",
                                float(abs(count - rigid)), 0.0))
        if mesh.n_nodes > d + 1:
            bare = rigid_mode_count(mesh, 0.0)
            rows.append(CheckResult("rank", f"{kind} beta=0 zero modes {bare}",
                                    0.0 if bare > rigid else 1.0, 0.0))
    return rows


SUITES = {
    "patch": patch_suite,
    "fd": fd_suite,
    "mass": mass_suite,
    "rank": rank_suite,
}


def run_suite(name: str, **options) -> List[CheckResult]:
    """Run a suite by name and log its summary."""
    if name not in SUITES:
        raise ValueError(f"unknown verification suite '{name}' (choose from {', '.join(SUITES)})")
    rows = SUITES[name](**options)
    failed = sum(1 for r in rows if not r.passed)
    app_logger.info(f"verify {name}: {len(rows) - failed}/{len(rows)} checks passed")
    return rows
