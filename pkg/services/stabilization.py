"""
Consistency and stabilization energies of an element and their derivatives.

The consistency part evaluates the strain energy once per element with the
projected (constant) gradient. The stabilization part evaluates it on the
simplex submesh with the nodal field. Static element quantities blend the two
with beta_stat; load terms belong to the consistency part only.
"""
from typing import Optional, Tuple

import numpy as np

from models.fem_models import Mesh, PolytopalElement, ProjectionOperator
from services.geometry import subdivide_element
from services.material import NeoHookean
from services.projection import gradient_operator, monomial_matrix_H, simplex_gradients
from utils.errors import InvertedElement


def hyperelastic_kernel(B: np.ndarray, measures: np.ndarray, u: np.ndarray, material: NeoHookean,
                        owners: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Energy, residual and tangent of a batch of constant-gradient cells.

    Args:
        B: (m, d*d, k) gradient operators, G = B u
        measures: (m,) cell measures
        u: (m, k) cell displacement vectors
        material: constitutive model
        owners: (m,) element id of every cell, attached to InvertedElement

    Returns:
        energy (m,), R = Omega B^T vec(P) (m, k), K = Omega B^T A B (m, k, k)
    """
    m, dd, _ = B.shape
    d = int(round(np.sqrt(dd)))
    F = np.eye(d) + np.einsum("mpk,mk->mp", B, u).reshape(m, d, d)
    det = np.linalg.det(F)
    bad = np.flatnonzero(det <= 0.0)
    if bad.size:
        cell = int(bad[0])
        eid = int(owners[cell]) if owners is not None else None
        raise InvertedElement(f"det F = {det[cell]:.3e}", element_id=eid)
    psi, P, A = material.stress_and_tangent(F)
    energy = measures * psi
    R = measures[:, None] * np.einsum("mpk,mp->mk", B, P.reshape(m, dd))
    K = measures[:, None, None] * np.einsum("mpk,mpq,mql->mkl", B, A.reshape(m, dd, dd), B)
    return energy, R, K


def body_load_vector(projection: ProjectionOperator, body_force) -> np.ndarray:
    """
    Work-conjugate nodal vector of a constant body force integrated with the
    projected field: Omega (H(X_c) Pi)^T f. Exact for linear monomials.
    """
    d = projection.dimension
    H = monomial_matrix_H(projection.centroid, d, projection.origin, projection.scale)
    return projection.measure * (H @ projection.pi_nabla).T @ np.asarray(body_force, dtype=float)


def consistency_energy(element: PolytopalElement, projection: ProjectionOperator, material: NeoHookean,
                       u_e, body_force=None) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Psi(C(I + grad u_P)) Omega minus the body-force work on u_P.

    Returns:
        (U_c, dU_c/du_e, d2U_c/du_e2)
    """
    u_e = np.asarray(u_e, dtype=float)
    energy, R, K = hyperelastic_kernel(projection.grad_map[None], np.array([projection.measure]),
                                       u_e[None], material)
    U, R, K = float(energy[0]), R[0], K[0]
    if body_force is not None:
        f = body_load_vector(projection, body_force)
        U -= float(f @ u_e)
        R = R - f
    return U, R, K


def submesh_operators(element: PolytopalElement, mesh: Mesh, simplices: Optional[np.ndarray] = None):
    """
    Gradient operators of the submesh simplices in element-local DOFs.

    Returns:
        (B (m, d*d, d(d+1)), measures (m,), local dof index (m, d(d+1)))
    """
    d = mesh.dimension
    if simplices is None:
        simplices = subdivide_element(element, mesh)
    grads, measures = simplex_gradients(mesh.coordinates[simplices])
    local = element.local_index()
    dofs = np.array([[local[v] * d + i for v in simplex for i in range(d)] for simplex in simplices])
    return gradient_operator(grads), measures, dofs


def stabilization_energy(element: PolytopalElement, mesh: Mesh, material: NeoHookean, u_e,
                         simplices: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Sum over submesh simplices of Psi(C(I + grad u_h|_T)) Omega_T.

    Returns:
        (U_s, dU_s/du_e, d2U_s/du_e2)
    """
    u_e = np.asarray(u_e, dtype=float)
    B, measures, dofs = submesh_operators(element, mesh, simplices)
    energy, R_t, K_t = hyperelastic_kernel(B, measures, u_e[dofs], material)
    n = u_e.shape[0]
    R = np.bincount(dofs.ravel(), weights=R_t.ravel(), minlength=n)
    K = np.zeros((n, n))
    for idx, k_t in zip(dofs, K_t):
        K[np.ix_(idx, idx)] += k_t
    return float(energy.sum()), R, K


def element_potential(element: PolytopalElement, mesh: Mesh, projection: ProjectionOperator,
                      material: NeoHookean, u_e, beta_stat: float,
                      simplices: Optional[np.ndarray] = None, body_force=None) -> float:
    """Static element energy (1 - beta) U_c + beta U_s minus the load work."""
    u_e = np.asarray(u_e, dtype=float)
    U_c, _, _ = consistency_energy(element, projection, material, u_e)
    U_s, _, _ = stabilization_energy(element, mesh, material, u_e, simplices)
    U = (1.0 - beta_stat) * U_c + beta_stat * U_s
    if body_force is not None:
        U -= float(body_load_vector(projection, body_force) @ u_e)
    return U


def element_static(element: PolytopalElement, mesh: Mesh, projection: ProjectionOperator,
                   material: NeoHookean, u_e, beta_stat: float,
                   simplices: Optional[np.ndarray] = None, body_force=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Static element residual and tangent.

    R = (1 - beta) R_c + beta R_s - f_body, K = (1 - beta) K_c + beta K_s

    Returns:
        (R_e, K_e) in node-major local DOF ordering
    """
    u_e = np.asarray(u_e, dtype=float)
    _, R_c, K_c = consistency_energy(element, projection, material, u_e)
    _, R_s, K_s = stabilization_energy(element, mesh, material, u_e, simplices)
    R = (1.0 - beta_stat) * R_c + beta_stat * R_s
    K = (1.0 - beta_stat) * K_c + beta_stat * K_s
    if body_force is not None:
        R = R - body_load_vector(projection, body_force)
    return R, K
