import numpy as np


def central_gradient(func, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for k in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[k] = h
        grad[k] = (func(x + e) - func(x - e)) / (2.0 * h)
    return grad


def central_jacobian(func, x, h=1e-6):
    """Central-difference Jacobian of a vector function, shape func(x).shape + x.shape."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(func(x))
    jac = np.zeros(f0.shape + x.shape)
    for k in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[k] = h
        jac[(Ellipsis,) + k] = (np.asarray(func(x + e)) - np.asarray(func(x - e))) / (2.0 * h)
    return jac


def relative_error(actual, expected):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    scale = max(float(np.max(np.abs(expected))), 1e-300)
    return float(np.max(np.abs(actual - expected)) / scale)


def assert_relative_close(actual, expected, tol, what="value"):
    """Assert max |actual - expected| / max |expected| <= tol."""
    error = relative_error(actual, expected)
    assert error <= tol, f"{what}: relative error {error:.3e} exceeds {tol:.1e}"


def assert_symmetric(matrix, tol=0.0):
    matrix = matrix.toarray() if hasattr(matrix, "toarray") else np.asarray(matrix)
    asym = float(np.max(np.abs(matrix - matrix.T)))
    assert asym <= tol * max(float(np.max(np.abs(matrix))), 1.0), f"matrix not symmetric (max |K - K^T| = {asym:.3e})"


def affine_nodal_field(coordinates, A, c=None):
    """Node-major vector of u = c + A X at the given points."""
    coordinates = np.asarray(coordinates, dtype=float)
    A = np.asarray(A, dtype=float)
    u = coordinates @ A.T
    if c is not None:
        u = u + np.asarray(c, dtype=float)[None, :]
    return u.ravel()


def translation(n_nodes, dimension, axis):
    """Unit rigid translation along one axis."""
    t = np.zeros(n_nodes * dimension)
    t[axis::dimension] = 1.0
    return t
