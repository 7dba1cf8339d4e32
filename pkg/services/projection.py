"""
Element projection onto linear fields.

The constant gradient of the projected field comes from the boundary integral
    grad u_P = 1/Omega int_Gamma u_h (x) N dGamma,
evaluated exactly per edge in 2D and by the one-point rule on fan triangles of
each face in 3D. The constant part follows from matching the nodal average:
    a_const = 1/n sum_I (u_I - grad u_P X_I).

Ordering conventions (single source of truth):
    nodal DOFs      u_e[a*d + i]          node a, direction i
    parameters      a[m*d + i]            monomial m in (1, X, Y[, Z]), direction i
    gradient        G[i*d + J] = du_i/dX_J
"""
from typing import Optional

import numpy as np

from models.fem_models import Mesh, PolytopalElement, ProjectionOperator
from services.geometry import element_measure_centroid, triangulate_faces
from utils.errors import DegenerateElement


def monomial_values(X, dimension: int, origin=None, scale: float = 1.0) -> np.ndarray:
    """Monomials N = (1, (X - origin)/scale) at points X, shape (..., d+1)."""
    X = np.asarray(X, dtype=float)
    shifted = X if origin is None else X - np.asarray(origin, dtype=float)
    ones = np.ones(X.shape[:-1] + (1,))
    return np.concatenate([ones, shifted / scale], axis=-1)


def monomial_matrix_H(X, dimension: int, origin=None, scale: float = 1.0) -> np.ndarray:
    """
    Matrix representation of the linear ansatz, u_P(X) = H(X) a.

    H[i, m*d + i] = N_m(X); shape (d, d(d+1)) or (n, d, d(d+1)) for a batch.
    """
    d = dimension
    N = monomial_values(X, d, origin, scale)
    return np.einsum("...m,ij->...imj", N, np.eye(d)).reshape(N.shape[:-1] + (d, d * (d + 1)))


def projected_gradient(element: PolytopalElement, mesh: Mesh, measure: Optional[float] = None) -> np.ndarray:
    """
    Map from nodal displacements to the constant projected gradient.

    Returns:
        grad_map of shape (d*d, d*n)

    Raises:
        DegenerateElement: element measure not positive
    """
    d = mesh.dimension
    n = element.n_nodes
    if measure is None:
        measure, _ = element_measure_centroid(element, mesh)
    if measure <= 0:
        raise DegenerateElement(f"element measure {measure} is not positive")
    local = element.local_index()
    X = mesh.coordinates[list(element.node_ids)]
    # weights[a, J]: coefficient of u_a in (int u (x) N)_{iJ}
    weights = np.zeros((n, d))
    if d == 2:
        nxt = np.roll(np.arange(n), -1)
        edge = X[nxt] - X
        normal_length = np.column_stack([edge[:, 1], -edge[:, 0]])
        weights += 0.5 * normal_length
        weights[nxt] += 0.5 * normal_length
    else:
        for tri in triangulate_faces(element, mesh.coordinates):
            a, b, c = tri.vertices
            g_zeta = np.cross(a - c, b - c)
            for nid in tri.node_ids:
                weights[local[nid]] += g_zeta / 6.0
    weights /= measure
    grad_map = np.zeros((d * d, d * n))
    for i in range(d):
        grad_map[i * d:(i + 1) * d, i::d] = weights.T
    return grad_map


def constant_part(element: PolytopalElement, grad_map: np.ndarray, mesh: Mesh, origin=None) -> np.ndarray:
    """
    Rows of the projector giving the constant parameters a_{i,1}.

    a_const = 1/n sum_I (u_I - G (X_I - origin))

    Returns:
        (d, d*n) matrix
    """
    d = mesh.dimension
    n = element.n_nodes
    X = mesh.coordinates[list(element.node_ids)]
    if origin is not None:
        X = X - np.asarray(origin, dtype=float)
    averaging = np.kron(np.ones((1, n)) / n, np.eye(d))
    G = grad_map.reshape(d, d, d * n)
    correction = np.einsum("iJk,J->ik", G, X.mean(axis=0))
    return averaging - correction


def assemble_pi_nabla(element: PolytopalElement, mesh: Mesh, scaled: bool = False) -> ProjectionOperator:
    """
    Projection operator of an element.

    Args:
        element: polygon or polyhedron
        mesh: owning mesh
        scaled: use centroid-shifted monomials (X - X_c)/h_e with h_e the
            largest node distance from the centroid

    Returns:
        ProjectionOperator with pi_nabla of shape (d(d+1), d n)
    """
    d = mesh.dimension
    measure, centroid = element_measure_centroid(element, mesh)
    grad_map = projected_gradient(element, mesh, measure)
    if scaled:
        X = mesh.coordinates[list(element.node_ids)]
        origin = centroid
        scale = float(np.max(np.linalg.norm(X - centroid, axis=1)))
    else:
        origin = np.zeros(d)
        scale = 1.0
    pi = np.zeros((d * (d + 1), d * element.n_nodes))
    pi[:d] = constant_part(element, grad_map, mesh, origin)
    for J in range(d):
        for i in range(d):
            pi[(J + 1) * d + i] = scale * grad_map[i * d + J]
    return ProjectionOperator(pi, grad_map, measure, centroid, origin, scale)


def simplex_gradients(vertices) -> tuple:
    """
    Gradients of the linear shape functions of a batch of simplices.

    With J = [X_1 - X_0, ..., X_d - X_0], grad N_k (k >= 1) are the rows of J^-1
    and grad N_0 = -sum_k grad N_k.

    Args:
        vertices: (m, d+1, d)

    Returns:
        (grads (m, d+1, d), signed measures (m,))
    """
    vertices = np.asarray(vertices, dtype=float)
    d = vertices.shape[-1]
    jac = np.swapaxes(vertices[:, 1:, :] - vertices[:, :1, :], -1, -2)
    det = np.linalg.det(jac)
    inv = np.linalg.inv(jac)
    grads = np.concatenate([-inv.sum(axis=-2, keepdims=True), inv], axis=-2)
    factorial = 2.0 if d == 2 else 6.0
    return grads, det / factorial


def gradient_operator(grads: np.ndarray) -> np.ndarray:
    """
    B matrices mapping nodal displacements to vec(grad u).

    Args:
        grads: (m, n, d) shape-function gradients

    Returns:
        (m, d*d, d*n) with B[i*d + J, a*d + i] = grads[a, J]
    """
    m, n, d = grads.shape
    B = np.zeros((m, d, d, n, d))
    for i in range(d):
        B[:, i, :, :, i] = np.swapaxes(grads, 1, 2)
    return B.reshape(m, d * d, n * d)


def simplex_gradient_operator(vertices) -> np.ndarray:
    """P1 gradient operator of a single triangle/tetrahedron, shape (d*d, d*(d+1))."""
    grads, _ = simplex_gradients(np.asarray(vertices, dtype=float)[None])
    return gradient_operator(grads)[0]
