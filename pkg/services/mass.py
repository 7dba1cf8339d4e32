"""
Element mass matrices from the inertia pseudo-potential.

The projection part is M = Pi^T (rho int H^T H dOmega) Pi with
int H^T H = kron(Mm, Id), Mm[m, k] = int N_m N_k. The integral is evaluated at
the element centroid, over the simplex submesh, or exactly (polygon moments
from the boundary in 2D, closed-form tetrahedron moments in 3D).
"""
from typing import List, Optional, Tuple

import numpy as np

from models.fem_models import ElementMass, MassScheme, Mesh, PolytopalElement, ProjectionOperator
from services.geometry import polygon_moments, simplex_measures, subdivide_element
from services.material import NeoHookean
from services.projection import assemble_pi_nabla
from utils.quadrature import simplex_rule


def _moment_matrix(m0: float, m1: np.ndarray, m2: np.ndarray, scale: float) -> np.ndarray:
    d = m1.shape[0]
    Mm = np.empty((d + 1, d + 1))
    Mm[0, 0] = m0
    Mm[0, 1:] = Mm[1:, 0] = m1 / scale
    Mm[1:, 1:] = m2 / scale ** 2
    return Mm


def _point_moments(points: np.ndarray, weights: np.ndarray):
    m0 = float(weights.sum())
    m1 = weights @ points
    m2 = np.einsum("q,qa,qb->ab", weights, points, points)
    return m0, m1, m2


def _tet_moments(vertices: np.ndarray):
    """Exact moments of a batch of tetrahedra (m, 4, 3)."""
    V = simplex_measures(vertices)
    S = vertices.sum(axis=1)
    m0 = float(V.sum())
    m1 = (V[:, None] * S).sum(axis=0) / 4.0
    outer = np.einsum("tia,tib->tab", vertices, vertices) + np.einsum("ta,tb->tab", S, S)
    m2 = (V[:, None, None] * outer).sum(axis=0) / 20.0
    return m0, m1, m2


def monomial_moments(element: PolytopalElement, mesh: Mesh, scheme: MassScheme,
                     projection: Optional[ProjectionOperator] = None,
                     simplices: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Mm[m, k] = int N_m N_k dOmega for the monomials of the projection.

    Args:
        element: polygon or polyhedron
        mesh: owning mesh
        scheme: integration scheme
        projection: supplies monomial origin/scale and centroid (unscaled if None)
        simplices: precomputed submesh (global node ids)

    Returns:
        (d+1, d+1) symmetric matrix
    """
    d = mesh.dimension
    if projection is None:
        projection = assemble_pi_nabla(element, mesh)
    origin, scale = projection.origin, projection.scale
    scheme = MassScheme(scheme)

    if scheme == MassScheme.CENTROID:
        c = projection.centroid - origin
        m0 = projection.measure
        return _moment_matrix(m0, m0 * c, m0 * np.outer(c, c), scale)

    if scheme == MassScheme.EXACT and d == 2:
        loop = mesh.coordinates[list(element.node_ids)] - origin
        return _moment_matrix(*polygon_moments(loop), scale)

    if simplices is None:
        simplices = subdivide_element(element, mesh)
    vertices = mesh.coordinates[simplices] - origin

    if scheme == MassScheme.SUBTRIANGULATION:
        measures = simplex_measures(vertices)
        centroids = vertices.mean(axis=1)
        return _moment_matrix(*_point_moments(centroids, measures), scale)

    # exact in 3D: closed-form degree-2 moments per tetrahedron
    return _moment_matrix(*_tet_moments(vertices), scale)


def reference_moments(element: PolytopalElement, mesh: Mesh, degree: int = 4,
                      projection: Optional[ProjectionOperator] = None,
                      simplices: Optional[np.ndarray] = None) -> np.ndarray:
    """Brute-force Mm by Gauss-Jacobi quadrature on the submesh simplices."""
    if projection is None:
        projection = assemble_pi_nabla(element, mesh)
    if simplices is None:
        simplices = subdivide_element(element, mesh)
    origin, scale = projection.origin, projection.scale
    m0, m1, m2 = 0.0, 0.0, 0.0
    for simplex in simplices:
        points, weights = simplex_rule(mesh.coordinates[simplex] - origin, degree)
        a, b, c = _point_moments(points, weights)
        m0, m1, m2 = m0 + a, m1 + b, m2 + c
    return _moment_matrix(m0, m1, m2, scale)


def hth_integral(element: PolytopalElement, mesh: Mesh, scheme: MassScheme,
                 projection: Optional[ProjectionOperator] = None,
                 simplices: Optional[np.ndarray] = None) -> np.ndarray:
    """int H^T H dOmega, shape (d(d+1), d(d+1)), parameter ordering m*d + i."""
    Mm = monomial_moments(element, mesh, scheme, projection, simplices)
    return np.kron(Mm, np.eye(mesh.dimension))


def element_mass(element: PolytopalElement, mesh: Mesh, material: NeoHookean, scheme: MassScheme,
                 projection: Optional[ProjectionOperator] = None,
                 simplices: Optional[np.ndarray] = None) -> ElementMass:
    """
    Projection-only mass matrix M = Pi^T (rho int H^T H) Pi.

    Its rank is at most d(d+1).
    """
    if projection is None:
        projection = assemble_pi_nabla(element, mesh)
    hth = hth_integral(element, mesh, scheme, projection, simplices)
    pi = projection.pi_nabla
    M = material.rho * (pi.T @ hth @ pi)
    return ElementMass(0.5 * (M + M.T))


def simplex_mass_blocks(measures: np.ndarray, rho: float, dimension: int) -> np.ndarray:
    """
    Centroid-rule mass of linear simplices with nodal fields:
    rho Omega_T / (d+1)^2 ones (x) Id, batch shape (m, d(d+1), d(d+1)).
    """
    k = dimension + 1
    block = np.kron(np.ones((k, k)), np.eye(dimension)) / k ** 2
    return rho * measures[:, None, None] * block[None]


def stabilized_element_mass(element: PolytopalElement, mesh: Mesh, material: NeoHookean,
                            simplices: Optional[np.ndarray] = None) -> ElementMass:
    """Mass matrix from the nodal field on the simplex submesh only."""
    d = mesh.dimension
    if simplices is None:
        simplices = subdivide_element(element, mesh)
    local = element.local_index()
    measures = simplex_measures(mesh.coordinates[simplices])
    blocks = simplex_mass_blocks(measures, material.rho, d)
    n = element.n_nodes
    M = np.zeros((d * n, d * n))
    for simplex, block in zip(simplices, blocks):
        dofs = np.array([local[v] * d + i for v in simplex for i in range(d)])
        M[np.ix_(dofs, dofs)] += block
    return ElementMass(0.5 * (M + M.T))


def blended_element_mass(element: PolytopalElement, mesh: Mesh, material: NeoHookean, scheme: MassScheme,
                         beta_dyn: float, projection: Optional[ProjectionOperator] = None,
                         simplices: Optional[np.ndarray] = None) -> ElementMass:
    """M = (1 - beta_dyn) M_projection + beta_dyn M_stabilization."""
    parts: List[Tuple[float, np.ndarray]] = []
    if beta_dyn < 1.0:
        parts.append((1.0 - beta_dyn, element_mass(element, mesh, material, scheme, projection, simplices).M))
    if beta_dyn > 0.0:
        parts.append((beta_dyn, stabilized_element_mass(element, mesh, material, simplices).M))
    return ElementMass(sum(w * M for w, M in parts))
