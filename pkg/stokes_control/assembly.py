"""Sparse bilinear forms and load vectors of the discrete optimality systems.

Elemental arrays are computed in chunks of triangles and scattered with
``coo -> csr`` conversion, which sums duplicate entries. Chunks may be
evaluated on a thread pool; results are merged in chunk order so the
assembled matrices do not depend on the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
from dagster import get_dagster_logger
from scipy import sparse

from stokes_control.errors import AssemblyError
from stokes_control.fe_spaces import FESpace, Family, Field, eval_basis, physical_points
from stokes_control.mesh import RegionTag
from stokes_control.quadrature import ASSEMBLY_DEGREE, DATA_DEGREE, triangle_rule
from stokes_control.reconstruction import ReconstructionOperator

logger = get_dagster_logger(__name__)

CHUNK_SIZE = 2048

GradientField = Callable[[np.ndarray, np.ndarray], np.ndarray]


class MassMode(str, Enum):
    """Which argument of the mass form is reconstructed (test first, trial second)."""

    IdId = "IdId"
    IdPi = "IdPi"
    PiId = "PiId"
    PiPi = "PiPi"


class LoadMode(str, Enum):
    ID = "id"
    PI = "pi"


def _chunks(elements: np.ndarray, size: int = CHUNK_SIZE) -> Iterator[np.ndarray]:
    for start in range(0, len(elements), size):
        yield elements[start : start + size]


def _map_chunks(func, elements: np.ndarray, threads: int = 1) -> List:
    chunks = list(_chunks(elements))
    if threads <= 1 or len(chunks) <= 1:
        return [func(chunk) for chunk in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, chunks))


def _weights(space: FESpace, elements: np.ndarray, rule) -> np.ndarray:
    """Physical quadrature weights, shape (nel, nq)."""
    return 2.0 * space.mesh.areas[elements, None] * rule.weights[None, :]


def _region_elements(space: FESpace, region: RegionTag) -> np.ndarray:
    return np.flatnonzero(space.mesh.region_mask(region))


def _to_csr(
    parts: List[Tuple[np.ndarray, np.ndarray, np.ndarray]], shape: Tuple[int, int]
) -> sparse.csr_matrix:
    if not parts:
        return sparse.csr_matrix(shape)
    rows = np.concatenate([p[0].ravel() for p in parts])
    cols = np.concatenate([p[1].ravel() for p in parts])
    vals = np.concatenate([p[2].ravel() for p in parts])
    if not np.all(np.isfinite(vals)):
        raise AssemblyError(f"non-finite entries in assembled {shape[0]}x{shape[1]} matrix")
    return sparse.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()


def _local_pairs(test_dofs: np.ndarray, trial_dofs: np.ndarray, local: np.ndarray):
    """Row/col index arrays matching ``local`` of shape (nel, n_test, n_trial)."""
    rows = np.broadcast_to(test_dofs[:, :, None], local.shape)
    cols = np.broadcast_to(trial_dofs[:, None, :], local.shape)
    return rows, cols, local


def _scatter_vector(dofs: np.ndarray, local: np.ndarray, ndofs: int) -> np.ndarray:
    return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=ndofs)


def assemble_vector_laplacian(
    space: FESpace, degree: int = ASSEMBLY_DEGREE, threads: int = 1
) -> sparse.csr_matrix:
    """A_ij = (grad phi_j, grad phi_i); viscosity is applied by the caller."""
    if not space.is_vector:
        raise AssemblyError(f"vector Laplacian needs a velocity space, got {space.family.value}")
    rule = triangle_rule(degree)

    def chunk(elements):
        grads = eval_basis(space, rule.barycentric, elements).grads
        local = np.einsum("tq,tqacd,tqbcd->tab", _weights(space, elements, rule), grads, grads)
        return _local_pairs(space.dofs[elements], space.dofs[elements], local)

    parts = _map_chunks(chunk, np.arange(space.mesh.n_triangles), threads)
    return _to_csr(parts, (space.ndofs, space.ndofs))


def assemble_divergence(
    velocity: FESpace, pressure: FESpace, degree: int = ASSEMBLY_DEGREE, threads: int = 1
) -> sparse.csr_matrix:
    """B_ij = (div phi_j, psi_i), pressure rows by velocity columns."""
    pairs = {(Family.BR, Family.P0), (Family.P2, Family.P1DISC)}
    if (velocity.family, pressure.family) not in pairs:
        raise AssemblyError(
            f"incompatible pair {velocity.family.value}/{pressure.family.value}; "
            "expected BR_velocity/P0_pressure or P2_velocity/P1disc_pressure"
        )
    if velocity.mesh is not pressure.mesh:
        raise AssemblyError("velocity and pressure spaces live on different meshes")
    rule = triangle_rule(degree)

    def chunk(elements):
        div = eval_basis(velocity, rule.barycentric, elements).div
        psi = eval_basis(pressure, rule.barycentric, elements).values
        local = np.einsum("tq,tqa,tqb->tab", _weights(velocity, elements, rule), psi, div)
        return _local_pairs(pressure.dofs[elements], velocity.dofs[elements], local)

    parts = _map_chunks(chunk, np.arange(velocity.mesh.n_triangles), threads)
    return _to_csr(parts, (pressure.ndofs, velocity.ndofs))


def assemble_pressure_mean(pressure: FESpace, degree: int = ASSEMBLY_DEGREE) -> np.ndarray:
    """Weights c with c @ p = integral of p over the domain."""
    rule = triangle_rule(degree)
    elements = np.arange(pressure.mesh.n_triangles)
    psi = eval_basis(pressure, rule.barycentric, elements).values
    local = np.einsum("tq,tqa->ta", _weights(pressure, elements, rule), psi)
    return _scatter_vector(pressure.dofs, local, pressure.ndofs)


def _local_vector_mass(space: FESpace, elements: np.ndarray, rule) -> np.ndarray:
    phi = eval_basis(space, rule.barycentric, elements).values
    return np.einsum("tq,tqac,tqbc->tab", _weights(space, elements, rule), phi, phi)


def _require_reconstruction(space: FESpace, reconstruction: Optional[ReconstructionOperator], what: str):
    if reconstruction is None:
        raise AssemblyError(f"{what} needs a reconstruction operator")
    if reconstruction.source is not space:
        raise AssemblyError(f"{what}: reconstruction source is not the given velocity space")
    return reconstruction


def assemble_mass(
    space: FESpace,
    mode: MassMode = MassMode.IdId,
    region: RegionTag = RegionTag.WHOLE,
    reconstruction: Optional[ReconstructionOperator] = None,
    degree: int = ASSEMBLY_DEGREE,
    threads: int = 1,
) -> sparse.csr_matrix:
    """M_ij = (P phi_j, Q phi_i) over ``region`` with Q/P chosen by ``mode``.

    PiPi uses R_T^T M_BDM R_T and IdPi the mixed BR x BDM1 blocks times R_T;
    PiId is the transpose of IdPi.
    """
    mode = MassMode(mode)
    if not space.is_vector:
        raise AssemblyError(f"mass matrix needs a velocity space, got {space.family.value}")
    if mode is MassMode.PiId:
        return assemble_mass(space, MassMode.IdPi, region, reconstruction, degree, threads).T.tocsr()

    rule = triangle_rule(degree)
    elements = _region_elements(space, region)

    if mode is MassMode.IdId:

        def chunk(elements):
            local = _local_vector_mass(space, elements, rule)
            return _local_pairs(space.dofs[elements], space.dofs[elements], local)

    else:
        op = _require_reconstruction(space, reconstruction, f"{mode.value} mass")
        target = op.target

        def chunk(elements):
            weights = _weights(space, elements, rule)
            psi = eval_basis(target, rule.barycentric, elements).values
            r_t = op.local[elements]
            if mode is MassMode.PiPi:
                bdm_mass = np.einsum("tq,tqac,tqbc->tab", weights, psi, psi)
                local = np.einsum("tfa,tfg,tgb->tab", r_t, bdm_mass, r_t)
            else:
                phi = eval_basis(space, rule.barycentric, elements).values
                mixed = np.einsum("tq,tqac,tqfc->taf", weights, phi, psi)
                local = np.einsum("taf,tfb->tab", mixed, r_t)
            return _local_pairs(space.dofs[elements], space.dofs[elements], local)

    parts = _map_chunks(chunk, elements, threads)
    matrix = _to_csr(parts, (space.ndofs, space.ndofs))
    logger.debug(f"{mode.value} mass over {RegionTag(region).name}: {len(elements)} triangles, nnz={matrix.nnz}")
    return matrix


def _field_at_points(fn, space: FESpace, elements: np.ndarray, rule) -> np.ndarray:
    points = physical_points(space.mesh, rule.barycentric, elements)
    return np.asarray(fn(points[..., 0], points[..., 1]), dtype=float)


def assemble_load(
    space: FESpace,
    fn: Field,
    mode: LoadMode = LoadMode.ID,
    region: RegionTag = RegionTag.WHOLE,
    reconstruction: Optional[ReconstructionOperator] = None,
    degree: int = DATA_DEGREE,
) -> np.ndarray:
    """F_i = (fn, Q phi_i) over ``region`` with Q the identity or the reconstruction."""
    mode = LoadMode(mode)
    rule = triangle_rule(degree)
    out = np.zeros(space.ndofs)
    for elements in _chunks(_region_elements(space, region)):
        values = _field_at_points(fn, space, elements, rule)
        weights = _weights(space, elements, rule)
        if mode is LoadMode.ID:
            phi = eval_basis(space, rule.barycentric, elements).values
            local = np.einsum("tq,tqc,tqac->ta", weights, values, phi)
        else:
            op = _require_reconstruction(space, reconstruction, "reconstructed load")
            psi = eval_basis(op.target, rule.barycentric, elements).values
            bdm_local = np.einsum("tq,tqc,tqfc->tf", weights, values, psi)
            local = np.einsum("tf,tfa->ta", bdm_local, op.local[elements])
        out += _scatter_vector(space.dofs[elements], local, space.ndofs)
    return out


def assemble_divergence_load(space: FESpace, fn: Field, degree: int = DATA_DEGREE) -> np.ndarray:
    """F_i = (psi, div phi_i) for a scalar field psi."""
    rule = triangle_rule(degree)
    out = np.zeros(space.ndofs)
    for elements in _chunks(np.arange(space.mesh.n_triangles)):
        values = _field_at_points(fn, space, elements, rule)
        div = eval_basis(space, rule.barycentric, elements).div
        local = np.einsum("tq,tq,tqa->ta", _weights(space, elements, rule), values, div)
        out += _scatter_vector(space.dofs[elements], local, space.ndofs)
    return out


def assemble_gradient_load(space: FESpace, grad: GradientField, degree: int = DATA_DEGREE) -> np.ndarray:
    """F_i = (grad w, grad phi_i); ``grad`` returns (..., 2, 2) indexed [component, derivative]."""
    rule = triangle_rule(degree)
    out = np.zeros(space.ndofs)
    for elements in _chunks(np.arange(space.mesh.n_triangles)):
        values = _field_at_points(grad, space, elements, rule)
        grads = eval_basis(space, rule.barycentric, elements).grads
        local = np.einsum("tq,tqcd,tqacd->ta", _weights(space, elements, rule), values, grads)
        out += _scatter_vector(space.dofs[elements], local, space.ndofs)
    return out


@dataclass(eq=False)
class Discretization:
    """Velocity/pressure pair with its assembled forms, cached per instance.

    ``reconstruction`` is None for the Scott-Vogelius pair.
    """

    velocity: FESpace
    pressure: FESpace
    reconstruction: Optional[ReconstructionOperator] = None
    degree: int = ASSEMBLY_DEGREE
    data_degree: int = DATA_DEGREE
    threads: int = 1
    _masses: Dict[Tuple[MassMode, RegionTag], sparse.csr_matrix] = field(default_factory=dict, repr=False)

    @property
    def mesh(self):
        return self.velocity.mesh

    @cached_property
    def laplacian(self) -> sparse.csr_matrix:
        return assemble_vector_laplacian(self.velocity, self.degree, self.threads)

    @cached_property
    def divergence(self) -> sparse.csr_matrix:
        return assemble_divergence(self.velocity, self.pressure, self.degree, self.threads)

    @cached_property
    def mean_weights(self) -> np.ndarray:
        return assemble_pressure_mean(self.pressure, self.degree)

    def mass(self, mode: MassMode, region: RegionTag = RegionTag.WHOLE) -> sparse.csr_matrix:
        key = (MassMode(mode), RegionTag(region))
        if key not in self._masses:
            self._masses[key] = assemble_mass(
                self.velocity, key[0], key[1], self.reconstruction, self.degree, self.threads
            )
        return self._masses[key]

    def load(self, fn: Field, mode: LoadMode = LoadMode.ID, region: RegionTag = RegionTag.WHOLE) -> np.ndarray:
        return assemble_load(self.velocity, fn, mode, region, self.reconstruction, self.data_degree)
