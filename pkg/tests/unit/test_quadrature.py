from math import factorial

import numpy as np
import pytest

from utils.quadrature import integrate_on_simplex, reference_rule, simplex_rule

pytestmark = pytest.mark.unit


def _triangle_moment(a, b):
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def _tet_moment(a, b, c):
    return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)


@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4, 5])
def test_triangle_rule_is_exact(degree):
    points, weights = reference_rule(2, degree)
    for a in range(degree + 1):
        b = degree - a
        value = weights @ (points[:, 0] ** a * points[:, 1] ** b)
        assert value == pytest.approx(_triangle_moment(a, b), rel=1e-13)


@pytest.mark.parametrize("degree", [0, 1, 2, 4])
def test_tetrahedron_rule_is_exact(degree):
    points, weights = reference_rule(3, degree)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            c = degree - a - b
            value = weights @ (points[:, 0] ** a * points[:, 1] ** b * points[:, 2] ** c)
            assert value == pytest.approx(_tet_moment(a, b, c), rel=1e-13)


def test_weights_sum_to_reference_measure():
    assert reference_rule(2, 3)[1].sum() == pytest.approx(0.5)
    assert reference_rule(3, 3)[1].sum() == pytest.approx(1.0 / 6.0)


def test_points_lie_inside_reference_simplex():
    points, _ = reference_rule(3, 4)
    assert np.all(points > 0.0)
    assert np.all(points.sum(axis=1) < 1.0)


def test_unsupported_dimension():
    with pytest.raises(ValueError):
        reference_rule(4, 1)


def test_physical_rule_carries_jacobian():
    vertices = np.array([[1.0, 1.0], [3.0, 1.0], [1.0, 4.0]])
    points, weights = simplex_rule(vertices, 2)
    assert weights.sum() == pytest.approx(3.0)
    assert points @ np.ones(2) @ weights / 3.0 == pytest.approx((5.0 + 6.0) / 3.0)


def test_integrate_on_simplex_second_moment():
    """Given the unit tetrahedron, the integral of x^2 is 2!/5! = 1/60."""
    vertices = np.vstack([np.zeros(3), np.eye(3)])
    assert integrate_on_simplex(lambda p: p[:, 0] ** 2, vertices, 2) == pytest.approx(1.0 / 60.0)
    vector = integrate_on_simplex(lambda p: p, vertices, 1)
    np.testing.assert_allclose(vector, np.full(3, 1.0 / 24.0))
