from math import factorial

import numpy as np
import pytest

from stokes_control.errors import QuadratureError
from stokes_control.quadrature import MAX_DEGREE, MIN_DEGREE, edge_rule, triangle_rule


def monomial_integral(a: int, b: int) -> float:
    """Integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", range(MIN_DEGREE, MAX_DEGREE + 1))
def test_triangle_rule_exactness(degree):
    rule = triangle_rule(degree)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(0.5, rel=1e-14)
    x, y = rule.points.T
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            value = rule.weights @ (x**a * y**b)
            assert value == pytest.approx(monomial_integral(a, b), rel=1e-13)


def test_x2y_integral():
    rule = triangle_rule(3)
    x, y = rule.points.T
    assert rule.weights @ (x**2 * y) == pytest.approx(1 / 60, rel=1e-14)


def test_barycentric_points_sum_to_one():
    bary = triangle_rule(8).barycentric
    np.testing.assert_allclose(bary.sum(axis=1), 1.0)
    assert np.all(bary >= 0)


@pytest.mark.parametrize("degree", range(MIN_DEGREE, MAX_DEGREE + 1))
def test_edge_rule_exactness(degree):
    rule = edge_rule(degree)
    assert rule.weights.sum() == pytest.approx(1.0, rel=1e-14)
    for k in range(degree + 1):
        assert rule.weights @ rule.points**k == pytest.approx(1.0 / (k + 1), rel=1e-13)


@pytest.mark.parametrize("degree", [0, MAX_DEGREE + 1, 2.5])
def test_unsupported_degree(degree):
    with pytest.raises(QuadratureError, match="supported range"):
        triangle_rule(degree)
    with pytest.raises(QuadratureError):
        edge_rule(degree)


def test_product_rule_is_not_symmetric_but_vertex_order_does_not_matter_up_to_degree():
    rule = triangle_rule(4)
    bary = rule.barycentric
    swapped = np.sort(bary[:, [2, 1, 0]], axis=0)
    assert not np.allclose(np.sort(bary, axis=0), swapped)

    # a degree-4 polynomial in barycentric coordinates integrates the same under any vertex labelling
    def poly(lam):
        return lam[:, 0] ** 3 * lam[:, 1] + 2.0 * lam[:, 2] ** 2

    values = [rule.weights @ poly(bary[:, list(order)]) for order in ([0, 1, 2], [1, 2, 0], [2, 1, 0])]
    assert values == pytest.approx([values[0]] * 3, rel=1e-13)
