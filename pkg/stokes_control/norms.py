"""Quadrature-based L2 and H1-seminorm distances between fields.

A field is either analytic (callables of x, y) or discrete (a coefficient
vector in some space). Discrete fields living on another mesh are sampled at
the integration mesh's quadrature points through point location.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple, Union

import numpy as np

from stokes_control.fe_spaces import FESpace, evaluate, physical_points
from stokes_control.mesh import RegionTag, Triangulation, locate_points
from stokes_control.quadrature import DATA_DEGREE, QuadratureRule, triangle_rule

CHUNK_SIZE = 1024


@dataclass(frozen=True, eq=False)
class AnalyticField:
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def sample(self, mesh: Triangulation, elements: np.ndarray, rule: QuadratureRule, derivative: bool):
        points = physical_points(mesh, rule.barycentric, elements)
        fn = self.gradient if derivative else self.value
        if fn is None:
            raise ValueError("analytic field has no gradient")
        return np.asarray(fn(points[..., 0], points[..., 1]), dtype=float)


@lru_cache(maxsize=16)
def _located(source: Triangulation, target: Triangulation, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Containing ``source`` triangles of all ``target`` quadrature points."""
    rule = triangle_rule(degree)
    points = physical_points(target, rule.barycentric, np.arange(target.n_triangles))
    tris, bary = locate_points(source, points.reshape(-1, 2))
    nq = rule.size
    return tris.reshape(-1, nq), bary.reshape(-1, nq, 3)


@dataclass(frozen=True, eq=False)
class DiscreteField:
    space: FESpace
    coeffs: np.ndarray

    def sample(self, mesh: Triangulation, elements: np.ndarray, rule: QuadratureRule, derivative: bool):
        if mesh is self.space.mesh:
            values, grads = evaluate(self.space, self.coeffs, rule.barycentric, elements)
        else:
            tris, bary = _located(self.space.mesh, mesh, rule.degree)
            sub_tris = tris[elements]
            values, grads = evaluate(self.space, self.coeffs, bary[elements].reshape(-1, 1, 3), sub_tris.ravel())
            shape = sub_tris.shape
            values = values.reshape(shape + values.shape[2:])
            grads = grads.reshape(shape + grads.shape[2:])
        return grads if derivative else values


Sampled = Union[AnalyticField, DiscreteField, None]


def _squared_distance(
    a: Sampled,
    b: Sampled,
    mesh: Triangulation,
    derivative: bool,
    region: RegionTag = RegionTag.WHOLE,
    degree: int = DATA_DEGREE,
) -> float:
    rule = triangle_rule(degree)
    elements = np.flatnonzero(mesh.region_mask(region))
    total = 0.0
    for start in range(0, len(elements), CHUNK_SIZE):
        chunk = elements[start : start + CHUNK_SIZE]
        diff = 0.0
        if a is not None:
            diff = a.sample(mesh, chunk, rule, derivative)
        if b is not None:
            diff = diff - b.sample(mesh, chunk, rule, derivative)
        if np.isscalar(diff):
            continue
        weights = 2.0 * mesh.areas[chunk, None] * rule.weights[None, :]
        pointwise = diff.reshape(diff.shape[0], diff.shape[1], -1)
        total += float(np.einsum("tq,tqk,tqk->", weights, pointwise, pointwise))
    return total


def l2_distance(a: Sampled, b: Sampled, mesh: Triangulation, region=RegionTag.WHOLE, degree=DATA_DEGREE) -> float:
    return float(np.sqrt(_squared_distance(a, b, mesh, False, region, degree)))


def h1_distance(a: Sampled, b: Sampled, mesh: Triangulation, region=RegionTag.WHOLE, degree=DATA_DEGREE) -> float:
    """Distance in the H1 seminorm."""
    return float(np.sqrt(_squared_distance(a, b, mesh, True, region, degree)))


def l2_norm(a: Sampled, mesh: Triangulation, region=RegionTag.WHOLE, degree=DATA_DEGREE) -> float:
    return l2_distance(a, None, mesh, region, degree)
