from math import factorial

import numpy as np
import pytest

from erheo.quadrature import line_rule, triangle_rule


def exact_monomial(i, j):
    """Integral of x^i y^j over the reference triangle divided by its area 1/2."""
    return 2 * factorial(i) * factorial(j) / factorial(i + j + 2)


@pytest.mark.parametrize("degree", [1, 2, 3, 5, 8, 12, 16])
def test_triangle_rule_exactness(degree):
    L, w = triangle_rule(degree)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(L.sum(axis=1), 1.0)
    assert np.all(L >= 0)
    x, y = L[:, 1], L[:, 2]
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            assert np.dot(w, x**i * y**j) == pytest.approx(exact_monomial(i, j), rel=1e-12, abs=1e-15)


def test_seven_point_rule_not_degree_six():
    L, w = triangle_rule(5)
    assert len(w) == 7
    x, y = L[:, 1], L[:, 2]
    errs = [abs(np.dot(w, x**i * y**(6 - i)) - exact_monomial(i, 6 - i)) for i in range(7)]
    assert max(errs) > 1e-6


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_line_rule(n):
    t, w = line_rule(n)
    for k in range(2 * n):
        assert np.dot(w, t**k) == pytest.approx(1 / (k + 1), rel=1e-13)
