"""Finite element families, local basis evaluation and global dof maps.

Local basis functions are evaluated directly on the physical triangle from
barycentric coordinates and their (elementwise constant) gradients. Every
value returned by :func:`eval_basis` already carries the global sign factor,
so assembly only has to scatter with ``space.dofs``.

Local dof orderings
-------------------
BR_velocity      x(v0, v1, v2), y(v0, v1, v2), bubble(e0, e1, e2)
P2_velocity      x(v0, v1, v2, e0, e1, e2), y(same)
P0_pressure      one per triangle
P1disc_pressure  lambda_0, lambda_1, lambda_2
BDM1             mean(e0, e1, e2), moment(e0, e1, e2)

Local edge k is the edge opposite local vertex k.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from dagster import get_dagster_logger

from stokes_control.errors import SpaceError
from stokes_control.mesh import Triangulation
from stokes_control.quadrature import DATA_DEGREE, edge_rule, triangle_rule

logger = get_dagster_logger(__name__)

# scaled so the bubble has edge mean 1
BUBBLE_SCALE = 6.0
EDGE_MOMENT_DEGREE = 5

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


class Family(str, Enum):
    BR = "BR_velocity"
    P0 = "P0_pressure"
    P2 = "P2_velocity"
    P1DISC = "P1disc_pressure"
    BDM1 = "BDM1"

    @property
    def is_vector(self) -> bool:
        return self in (Family.BR, Family.P2, Family.BDM1)

    @property
    def local_size(self) -> int:
        return {Family.BR: 9, Family.P0: 1, Family.P2: 12, Family.P1DISC: 3, Family.BDM1: 6}[self]


@dataclass(frozen=True)
class BasisEval:
    """Basis values on a batch of elements.

    Vector families: values (nel, nq, nb, 2), grads (nel, nq, nb, 2, 2) indexed
    [component, derivative], div (nel, nq, nb). Scalar families: values
    (nel, nq, nb), grads (nel, nq, nb, 2), div None.
    """

    values: np.ndarray
    grads: np.ndarray
    div: Optional[np.ndarray]


@dataclass(frozen=True, eq=False)
class FESpace:
    family: Family
    mesh: Triangulation
    ndofs: int
    dofs: np.ndarray
    signs: np.ndarray
    boundary_dofs: np.ndarray

    @property
    def is_vector(self) -> bool:
        return self.family.is_vector

    @property
    def local_size(self) -> int:
        return self.family.local_size

    @cached_property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.ndofs, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)

    @cached_property
    def bdm_coefficients(self) -> np.ndarray:
        """Raw-P1 coefficients of the local BDM1 dual basis, (nt, 6 raw, 6 dofs)."""
        if self.family is not Family.BDM1:
            raise SpaceError(f"{self.family.value} has no BDM1 dual basis")
        moments = edge_moments(self.mesh, lambda lam: _raw_p1_vector(lam, self.mesh.grad_lambda)[0])
        return np.linalg.inv(moments)


def build_space(mesh: Triangulation, family: Union[Family, str]) -> FESpace:
    family = Family(family)
    nv, ne, nt = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
    tris, tri_edges = mesh.triangles, mesh.tri_edges
    ones = lambda k: np.ones((nt, k))  # noqa: E731
    bv = mesh.boundary_vertices
    be = np.flatnonzero(mesh.boundary_edges)

    if family in (Family.P2, Family.P1DISC) and not mesh.barycentric:
        raise SpaceError(
            f"{family.value} is the Scott-Vogelius pairing and needs a barycentrically refined mesh"
        )

    if family is Family.BR:
        ndofs = 2 * nv + ne
        dofs = np.hstack([tris, tris + nv, 2 * nv + tri_edges])
        signs = np.hstack([ones(6), mesh.tri_edge_signs.astype(float)])
        boundary = np.concatenate([bv, bv + nv, 2 * nv + be])
    elif family is Family.P2:
        nodes = nv + ne
        scalar = np.hstack([tris, nv + tri_edges])
        ndofs = 2 * nodes
        dofs = np.hstack([scalar, scalar + nodes])
        signs = ones(12)
        scalar_boundary = np.concatenate([bv, nv + be])
        boundary = np.concatenate([scalar_boundary, scalar_boundary + nodes])
    elif family is Family.P0:
        ndofs = nt
        dofs = np.arange(nt)[:, None]
        signs = ones(1)
        boundary = np.empty(0, dtype=np.int64)
    elif family is Family.P1DISC:
        ndofs = 3 * nt
        dofs = np.arange(3 * nt).reshape(nt, 3)
        signs = ones(3)
        boundary = np.empty(0, dtype=np.int64)
    else:
        ndofs = 2 * ne
        dofs = np.hstack([tri_edges, ne + tri_edges])
        edge_signs = mesh.tri_edge_signs.astype(float)
        signs = np.hstack([edge_signs, edge_signs])
        boundary = np.concatenate([be, ne + be])

    space = FESpace(
        family=family,
        mesh=mesh,
        ndofs=int(ndofs),
        dofs=np.ascontiguousarray(dofs, dtype=np.int64),
        signs=np.ascontiguousarray(signs, dtype=float),
        boundary_dofs=np.sort(boundary).astype(np.int64),
    )
    logger.debug(f"{family.value}: {space.ndofs} dofs on {nt} triangles")
    return space


def _raw_p1_vector(lam: np.ndarray, glam: np.ndarray):
    """Vector hat functions lambda_m e_c, local index c * 3 + m."""
    nel, nq, _ = lam.shape
    values = np.zeros((nel, nq, 6, 2))
    grads = np.zeros((nel, nq, 6, 2, 2))
    for c in range(2):
        values[:, :, 3 * c : 3 * c + 3, c] = lam
        grads[:, :, 3 * c : 3 * c + 3, c, :] = glam[:, None, :, :]
    return values, grads


def _br_local(lam: np.ndarray, glam: np.ndarray, normals: np.ndarray):
    nel, nq, _ = lam.shape
    values = np.zeros((nel, nq, 9, 2))
    grads = np.zeros((nel, nq, 9, 2, 2))
    values[:, :, :6], grads[:, :, :6] = _raw_p1_vector(lam, glam)
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        n = normals[:, k, :]
        phi = BUBBLE_SCALE * lam[..., i] * lam[..., j]
        dphi = BUBBLE_SCALE * (
            lam[..., i, None] * glam[:, None, j, :] + lam[..., j, None] * glam[:, None, i, :]
        )
        values[:, :, 6 + k, :] = phi[..., None] * n[:, None, :]
        grads[:, :, 6 + k, :, :] = n[:, None, :, None] * dphi[:, :, None, :]
    return values, grads


def _p2_local(lam: np.ndarray, glam: np.ndarray):
    nel, nq, _ = lam.shape
    shape = np.empty((nel, nq, 6))
    dshape = np.empty((nel, nq, 6, 2))
    for m in range(3):
        shape[..., m] = lam[..., m] * (2.0 * lam[..., m] - 1.0)
        dshape[..., m, :] = (4.0 * lam[..., m] - 1.0)[..., None] * glam[:, None, m, :]
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        shape[..., 3 + k] = 4.0 * lam[..., i] * lam[..., j]
        dshape[..., 3 + k, :] = 4.0 * (
            lam[..., i, None] * glam[:, None, j, :] + lam[..., j, None] * glam[:, None, i, :]
        )
    values = np.zeros((nel, nq, 12, 2))
    grads = np.zeros((nel, nq, 12, 2, 2))
    for c in range(2):
        values[:, :, 6 * c : 6 * c + 6, c] = shape
        grads[:, :, 6 * c : 6 * c + 6, c, :] = dshape
    return values, grads


def eval_basis(space: FESpace, bary: np.ndarray, elements: Optional[np.ndarray] = None) -> BasisEval:
    """Evaluate the global-signed local basis.

    ``bary`` is either (nq, 3), shared by all requested elements, or
    (nel, nq, 3) with per-element points.
    """
    mesh = space.mesh
    if elements is None:
        elements = np.arange(mesh.n_triangles)
    elements = np.atleast_1d(np.asarray(elements, dtype=np.int64))
    bary = np.asarray(bary, dtype=float)
    if bary.ndim == 2:
        bary = np.broadcast_to(bary, (len(elements),) + bary.shape)
    glam = mesh.grad_lambda[elements]
    signs = space.signs[elements]
    nel, nq, _ = bary.shape
    family = space.family

    if family is Family.P0:
        return BasisEval(np.ones((nel, nq, 1)), np.zeros((nel, nq, 1, 2)), None)
    if family is Family.P1DISC:
        grads = np.broadcast_to(glam[:, None, :, :], (nel, nq, 3, 2))
        return BasisEval(np.array(bary), np.array(grads), None)

    if family is Family.BR:
        values, grads = _br_local(bary, glam, mesh.outward_normals[elements])
    elif family is Family.P2:
        values, grads = _p2_local(bary, glam)
    else:
        raw_values, raw_grads = _raw_p1_vector(bary, glam)
        coeffs = space.bdm_coefficients[elements]
        values = np.einsum("tqrc,trf->tqfc", raw_values, coeffs)
        grads = np.einsum("tqrcd,trf->tqfcd", raw_grads, coeffs)

    values = values * signs[:, None, :, None]
    grads = grads * signs[:, None, :, None, None]
    return BasisEval(values, grads, grads[..., 0, 0] + grads[..., 1, 1])


def edge_moments(mesh: Triangulation, local_values: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Normal moments of local vector functions on the three edges.

    ``local_values`` maps per-element barycentric points (nt, nq, 3) to values
    (nt, nq, nb, 2). Row k is the mean outward normal flux on edge k, row 3 + k
    the moment against 3 (2s - 1) with s running from the lower to the higher
    global vertex index. Returns (nt, 6, nb).
    """
    rule = edge_rule(EDGE_MOMENT_DEGREE)
    tau, w = rule.points, rule.weights
    legendre = 3.0 * (2.0 * tau - 1.0)
    nt = mesh.n_triangles
    out = None
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        bary = np.zeros((len(tau), 3))
        bary[:, i] = 1.0 - tau
        bary[:, j] = tau
        values = local_values(np.broadcast_to(bary, (nt,) + bary.shape))
        flux = np.einsum("tqbc,tc->tqb", values, mesh.outward_normals[:, k, :])
        if out is None:
            out = np.empty((nt, 6, flux.shape[2]))
        out[:, k, :] = np.einsum("q,tqb->tb", w, flux)
        out[:, 3 + k, :] = mesh.local_edge_flip[:, k, None] * np.einsum("q,tqb->tb", w * legendre, flux)
    return out


def br_edge_moments(space: FESpace) -> np.ndarray:
    """Local BDM1 functionals applied to the local (unsigned) BR basis."""
    mesh = space.mesh
    return edge_moments(mesh, lambda lam: _br_local(lam, mesh.grad_lambda, mesh.outward_normals)[0])


def physical_points(mesh: Triangulation, bary: np.ndarray, elements: np.ndarray) -> np.ndarray:
    corners = mesh.vertices[mesh.triangles[elements]]
    if bary.ndim == 2:
        return np.einsum("qm,tmd->tqd", bary, corners)
    return np.einsum("tqm,tmd->tqd", bary, corners)


def evaluate(space: FESpace, coeffs: np.ndarray, bary: np.ndarray, elements: Optional[np.ndarray] = None):
    """Values and gradients of a coefficient vector at element points."""
    if elements is None:
        elements = np.arange(space.mesh.n_triangles)
    basis = eval_basis(space, bary, elements)
    local = np.asarray(coeffs)[space.dofs[elements]]
    if space.is_vector:
        values = np.einsum("tqbc,tb->tqc", basis.values, local)
        grads = np.einsum("tqbcd,tb->tqcd", basis.grads, local)
    else:
        values = np.einsum("tqb,tb->tq", basis.values, local)
        grads = np.einsum("tqbd,tb->tqd", basis.grads, local)
    return values, grads


def _evaluate_field(field: Field, points: np.ndarray) -> np.ndarray:
    return np.asarray(field(points[..., 0], points[..., 1]), dtype=float)


def interpolate(space: FESpace, field: Field) -> np.ndarray:
    """Canonical interpolant of an analytic field.

    Lagrange families use nodal values, P0/P1disc the elementwise L2
    projection, BDM1 the two normal moments per edge and BR the vertex values
    plus the mean normal flux not carried by the P1 part.
    """
    mesh = space.mesh
    family = space.family
    nv, ne = mesh.n_vertices, mesh.n_edges
    coeffs = np.zeros(space.ndofs)

    if family in (Family.BR, Family.P2):
        at_vertices = _evaluate_field(field, mesh.vertices)
        if family is Family.BR:
            coeffs[:nv] = at_vertices[:, 0]
            coeffs[nv : 2 * nv] = at_vertices[:, 1]
            flux = _edge_flux_moments(mesh, field)[0]
            a, b = mesh.edges[:, 0], mesh.edges[:, 1]
            linear = 0.5 * np.einsum("ec,ec->e", at_vertices[a] + at_vertices[b], mesh.edge_normals)
            coeffs[2 * nv :] = flux - linear
        else:
            midpoints = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
            at_edges = _evaluate_field(field, midpoints)
            nodes = nv + ne
            coeffs[:nv] = at_vertices[:, 0]
            coeffs[nv:nodes] = at_edges[:, 0]
            coeffs[nodes : nodes + nv] = at_vertices[:, 1]
            coeffs[nodes + nv :] = at_edges[:, 1]
        return coeffs

    if family is Family.BDM1:
        mean, moment = _edge_flux_moments(mesh, field)
        coeffs[:ne] = mean
        coeffs[ne:] = moment
        return coeffs

    rule = triangle_rule(DATA_DEGREE)
    elements = np.arange(mesh.n_triangles)
    values = _evaluate_field(field, physical_points(mesh, rule.barycentric, elements))
    basis = eval_basis(space, rule.barycentric, elements).values
    weights = 2.0 * mesh.areas[:, None] * rule.weights[None, :]
    rhs = np.einsum("tq,tq,tqb->tb", weights, values, basis)
    local_mass = np.einsum("tq,tqa,tqb->tab", weights, basis, basis)
    coeffs[space.dofs] = np.linalg.solve(local_mass, rhs[..., None])[..., 0]
    return coeffs


def _edge_flux_moments(mesh: Triangulation, field: Field):
    """Global-orientation mean normal flux and Legendre moment of a field per edge."""
    rule = edge_rule(DATA_DEGREE)
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    s = rule.points
    points = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    flux = np.einsum("eqc,ec->eq", _evaluate_field(field, points), mesh.edge_normals)
    mean = flux @ rule.weights
    moment = flux @ (rule.weights * 3.0 * (2.0 * s - 1.0))
    return mean, moment


def write_coefficients(space: FESpace, coeffs: np.ndarray, path: Union[str, Path], level: int) -> None:
    """CoeffVector text format: ``family n dofs`` header, one value per line."""
    coeffs = np.asarray(coeffs, dtype=float)
    if len(coeffs) != space.ndofs:
        raise SpaceError(f"{len(coeffs)} coefficients for a space with {space.ndofs} dofs")
    body = "\n".join(f"{v:.17g}" for v in coeffs)
    Path(path).write_text(f"{space.family.value} {level} {space.ndofs}\n{body}\n")


def read_coefficients(space: FESpace, path: Union[str, Path]) -> np.ndarray:
    lines = Path(path).read_text().split()
    family, _, ndofs = lines[0], lines[1], int(lines[2])
    if family != space.family.value or ndofs != space.ndofs:
        raise SpaceError(
            f"{path}: header ({family}, {ndofs}) does not match space ({space.family.value}, {space.ndofs})"
        )
    values = np.array([float(v) for v in lines[3:]])
    if len(values) != ndofs:
        raise SpaceError(f"{path}: expected {ndofs} values, found {len(values)}")
    return values
