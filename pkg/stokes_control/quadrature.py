"""Quadrature rules on the reference triangle and the reference edge."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from stokes_control.errors import QuadratureError

MIN_DEGREE = 1
MAX_DEGREE = 12

ASSEMBLY_DEGREE = 8
DATA_DEGREE = 12


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Points and positive weights exact up to ``degree``.

    Triangle rules live on {x, y >= 0, x + y <= 1} (weights sum to 1/2),
    edge rules on [0, 1] (weights sum to 1).
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def barycentric(self) -> np.ndarray:
        """Barycentric triples (lambda_0, lambda_1, lambda_2) of triangle points."""
        x, y = self.points[:, 0], self.points[:, 1]
        return np.column_stack([1.0 - x - y, x, y])


def _check_degree(degree: int) -> int:
    if int(degree) != degree or not MIN_DEGREE <= degree <= MAX_DEGREE:
        raise QuadratureError(
            f"unsupported quadrature degree {degree!r}; supported range is {MIN_DEGREE}..{MAX_DEGREE}"
        )
    return int(degree)


def _points_per_direction(degree: int) -> int:
    return degree // 2 + 1


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1]."""
    degree = _check_degree(degree)
    xi, w = roots_legendre(_points_per_direction(degree))
    return QuadratureRule(points=0.5 * (xi + 1.0), weights=0.5 * w, degree=degree)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Conical product rule on the reference triangle.

    The collapsed map (a, b) -> (a (1 - b), b) has Jacobian 1 - b, which is
    absorbed into a Gauss-Jacobi rule in b.
    """
    degree = _check_degree(degree)
    m = _points_per_direction(degree)
    xa, wa = roots_legendre(m)
    xb, wb = roots_jacobi(m, 1.0, 0.0)
    a = 0.5 * (xa + 1.0)
    b = 0.5 * (xb + 1.0)
    wa = 0.5 * wa
    wb = 0.25 * wb
    aa, bb = np.meshgrid(a, b, indexing="ij")
    points = np.column_stack([(aa * (1.0 - bb)).ravel(), bb.ravel()])
    weights = np.outer(wa, wb).ravel()
    return QuadratureRule(points=points, weights=weights, degree=degree)
