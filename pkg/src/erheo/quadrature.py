"""Quadrature rules on the reference triangle and on [0, 1].

Triangle rules return barycentric coordinates ``(nq, 3)`` and weights that
sum to one, so an element integral is ``area * sum(w * f)``.
"""
import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def _perm3(a, b):
    return [(a, b, b), (b, a, b), (b, b, a)]


@lru_cache(maxsize=None)
def triangle_rule(degree):
    """Rule exact for polynomials of total degree ``degree``."""
    if degree <= 1:
        return np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])
    if degree == 2:
        return np.array(_perm3(2 / 3, 1 / 6)), np.full(3, 1 / 3)
    if degree in (3, 4, 5):
        r = math.sqrt(15.0)
        a1, b1 = (9 + 2 * r) / 21, (6 - r) / 21
        a2, b2 = (9 - 2 * r) / 21, (6 + r) / 21
        pts = [(1 / 3, 1 / 3, 1 / 3)] + _perm3(a1, b1) + _perm3(a2, b2)
        w = [9 / 40] + [(155 - r) / 1200] * 3 + [(155 + r) / 1200] * 3
        return np.array(pts), np.array(w)
    return collapsed_rule(degree)


@lru_cache(maxsize=None)
def collapsed_rule(degree):
    """Conical product (Duffy) rule of arbitrary degree."""
    n = (degree + 2) // 2
    u, wu = roots_jacobi(n, 1.0, 0.0)  # weight (1 - u)
    x = (1 + u) / 2
    wx = wu / 4
    t, wt = roots_legendre(n)
    t = (1 + t) / 2
    wt = wt / 2
    X, T = np.meshgrid(x, t, indexing="ij")
    W = np.outer(wx, wt)
    Y = (1 - X) * T
    pts = np.stack([1 - X.ravel() - Y.ravel(), X.ravel(), Y.ravel()], axis=1)
    w = 2 * W.ravel()  # reference area 1/2
    return pts, w


@lru_cache(maxsize=None)
def line_rule(n=3):
    """Gauss-Legendre points on [0, 1] with weights summing to one."""
    t, w = roots_legendre(n)
    return (1 + t) / 2, w / 2
