"""
Collapsed Gauss-Jacobi quadrature on triangles and tetrahedra.

The reference simplex is mapped onto the unit square/cube by the collapsed
(Duffy) coordinates, so a tensor rule of Gauss-Jacobi points integrates
polynomials of the requested total degree exactly.
"""
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import roots_jacobi


def _points_for_degree(degree: int) -> int:
    return max(1, (degree + 2) // 2)


@lru_cache(maxsize=32)
def reference_rule(dimension: int, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature rule on the reference simplex.

    Args:
        dimension: 2 (triangle with vertices 0, e1, e2) or 3 (unit tetrahedron)
        degree: Total polynomial degree integrated exactly

    Returns:
        (points, weights) with points of shape (n, dimension); weights sum to
        the reference measure (1/2 or 1/6)
    """
    n = _points_for_degree(degree)
    legendre_x, legendre_w = roots_jacobi(n, 0.0, 0.0)
    w_pts = 0.5 * (legendre_x + 1.0)
    w_wts = 0.5 * legendre_w

    if dimension == 2:
        jx, jw = roots_jacobi(n, 1.0, 0.0)
        u = 0.5 * (jx + 1.0)
        uw = 0.25 * jw
        uu, ww = np.meshgrid(u, w_pts, indexing="ij")
        weights = np.outer(uw, w_wts).ravel()
        points = np.column_stack([uu.ravel(), ((1.0 - uu) * ww).ravel()])
        return points, weights

    if dimension == 3:
        jx2, jw2 = roots_jacobi(n, 2.0, 0.0)
        jx1, jw1 = roots_jacobi(n, 1.0, 0.0)
        u = 0.5 * (jx2 + 1.0)
        v = 0.5 * (jx1 + 1.0)
        uu, vv, ww = np.meshgrid(u, v, w_pts, indexing="ij")
        weights = np.einsum("i,j,k->ijk", 0.125 * jw2, 0.25 * jw1, w_wts).ravel()
        x = uu
        y = (1.0 - uu) * vv
        z = (1.0 - uu) * (1.0 - vv) * ww
        points = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
        return points, weights

    raise ValueError(f"Unsupported simplex dimension: {dimension}")


def simplex_rule(vertices: np.ndarray, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map the reference rule onto a physical simplex.

    Args:
        vertices: (d+1, d) vertex coordinates
        degree: Total polynomial degree integrated exactly

    Returns:
        (points, weights) in physical coordinates; weights carry |det J|
    """
    vertices = np.asarray(vertices, dtype=float)
    dimension = vertices.shape[1]
    ref_points, ref_weights = reference_rule(dimension, degree)
    jac = (vertices[1:] - vertices[0]).T
    points = vertices[0] + ref_points @ jac.T
    return points, ref_weights * abs(np.linalg.det(jac))


def integrate_on_simplex(func, vertices: np.ndarray, degree: int):
    """Integrate func (vectorized over points, shape (n, d) -> (n, ...)) on a simplex."""
    points, weights = simplex_rule(vertices, degree)
    values = np.asarray(func(points))
    return np.tensordot(weights, values, axes=(0, 0))
