"""Reconstruction of Bernardi-Raugel functions into BDM1 by edge-moment matching."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from dagster import get_dagster_logger
from scipy import sparse

from stokes_control.errors import ReconstructionError
from stokes_control.fe_spaces import FESpace, Family, br_edge_moments

logger = get_dagster_logger(__name__)


@dataclass(frozen=True, eq=False)
class ReconstructionOperator:
    """Elementwise matrices ``local[t]`` mapping local BR to local BDM1 dofs.

    Both sides carry the global sign factors, so ``local[t] @ c[br.dofs[t]]``
    gives the global BDM1 coefficients of the edges of ``t``.
    """

    source: FESpace
    target: FESpace
    local: np.ndarray

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        """Global operator; each edge takes its rows from its first owner."""
        mesh = self.source.mesh
        owner = mesh.edge_triangles[mesh.tri_edges, 0] == np.arange(mesh.n_triangles)[:, None]
        tris, ks = np.nonzero(owner)
        ne = mesh.n_edges
        rows, cols, vals = [], [], []
        for offset in (0, 3):
            local_rows = self.local[tris, ks + offset, :]
            rows.append(np.repeat(self.target.dofs[tris, ks + offset], 9))
            cols.append(self.source.dofs[tris].ravel())
            vals.append(local_rows.ravel())
        matrix = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2 * ne, self.source.ndofs),
        ).tocsr()
        matrix.eliminate_zeros()
        return matrix

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != self.source.ndofs:
            raise ReconstructionError(
                f"expected {self.source.ndofs} BR coefficients, got {coeffs.shape[0]}"
            )
        return self.matrix @ coeffs


def build_reconstruction(br_space: FESpace, bdm_space: FESpace) -> ReconstructionOperator:
    if br_space.family is not Family.BR or bdm_space.family is not Family.BDM1:
        raise ReconstructionError(
            f"reconstruction maps BR_velocity to BDM1, got {br_space.family.value} -> {bdm_space.family.value}"
        )
    if br_space.mesh is not bdm_space.mesh:
        raise ReconstructionError("source and target spaces live on different meshes")

    moments = br_edge_moments(br_space)
    local = bdm_space.signs[:, :, None] * moments * br_space.signs[:, None, :]
    logger.debug(f"reconstruction: {br_space.mesh.n_triangles} local 6x9 blocks")
    return ReconstructionOperator(source=br_space, target=bdm_space, local=local)


def apply(op: ReconstructionOperator, br_coeffs: np.ndarray) -> np.ndarray:
    return op.apply(br_coeffs)
