"""Composition and direct solution of the coupled state/adjoint optimality systems.

Unknown layout after Dirichlet elimination::

    [u_free, p, z_free, lambda, mu_p, mu_lambda]

where mu_p and mu_lambda are the multipliers of the two zero-mean pressure
constraints. The adjoint is rescaled (z = w / sqrt(alpha)) so the coupling
blocks carry the factor s = alpha^(-1/2).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from dagster import get_dagster_logger
from scipy import sparse
from scipy.sparse.linalg import splu

from stokes_control.assembly import Discretization, LoadMode, MassMode
from stokes_control.errors import ConfigError, SolverError, SpaceError
from stokes_control.fe_spaces import Family, Field, FESpace, build_space, interpolate
from stokes_control.mesh import RegionTag, Triangulation, refine_barycentric
from stokes_control.norms import AnalyticField, DiscreteField, l2_distance, l2_norm
from stokes_control.problems import Example, ExampleData
from stokes_control.quadrature import ASSEMBLY_DEGREE, DATA_DEGREE
from stokes_control.reconstruction import build_reconstruction

logger = get_dagster_logger(__name__)

DEFAULT_TOLERANCE = 1e-10
REFINEMENT_STEPS = 3


class Scheme(str, Enum):
    CLASSICAL = "Classical"
    PARTIAL_ROBUST = "PartialRobust"
    FULL_ROBUST = "FullRobust"
    SCOTT_VOGELIUS = "ScottVogelius"

    @property
    def reconstructs_observation(self) -> bool:
        """Pi_1 of the scheme table."""
        return self is Scheme.FULL_ROBUST

    @property
    def reconstructs_control(self) -> bool:
        """Pi_2 of the scheme table."""
        return self in (Scheme.PARTIAL_ROBUST, Scheme.FULL_ROBUST)


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme
    nu: float
    alpha: float
    eps: float = 0.0
    example: Example = Example.EX1
    tolerance: float = DEFAULT_TOLERANCE
    # replaces Pi by the identity in every pairing
    identity_reconstruction: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "scheme", Scheme(self.scheme))
            object.__setattr__(self, "example", Example(int(self.example)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.alpha > 0:
            raise ConfigError(f"regularization weight must be positive, got alpha={self.alpha}")
        if not self.nu > 0:
            raise ConfigError(f"viscosity must be positive, got nu={self.nu}")
        if not self.tolerance > 0:
            raise ConfigError(f"solver tolerance must be positive, got {self.tolerance}")

    @property
    def scale(self) -> float:
        return self.alpha ** -0.5

    @property
    def pi1(self) -> bool:
        return self.scheme.reconstructs_observation and not self.identity_reconstruction

    @property
    def pi2(self) -> bool:
        return self.scheme.reconstructs_control and not self.identity_reconstruction


def build_discretization(
    mesh: Triangulation,
    scheme: Scheme,
    degree: int = ASSEMBLY_DEGREE,
    data_degree: int = DATA_DEGREE,
    threads: int = 1,
) -> Discretization:
    """BR/P0 with BDM1 reconstruction, or P2/P1disc on the barycentric split of ``mesh``."""
    if Scheme(scheme) is Scheme.SCOTT_VOGELIUS:
        if not mesh.barycentric:
            mesh = refine_barycentric(mesh)
        return Discretization(
            velocity=build_space(mesh, Family.P2),
            pressure=build_space(mesh, Family.P1DISC),
            degree=degree,
            data_degree=data_degree,
            threads=threads,
        )
    velocity = build_space(mesh, Family.BR)
    return Discretization(
        velocity=velocity,
        pressure=build_space(mesh, Family.P0),
        reconstruction=build_reconstruction(velocity, build_space(mesh, Family.BDM1)),
        degree=degree,
        data_degree=data_degree,
        threads=threads,
    )


def _check_pairing(disc: Discretization, config: SchemeConfig) -> None:
    family = disc.velocity.family
    if config.scheme is Scheme.SCOTT_VOGELIUS and family is not Family.P2:
        raise SpaceError(f"ScottVogelius needs the P2/P1disc pair, got {family.value}")
    if config.scheme is not Scheme.SCOTT_VOGELIUS and family is not Family.BR:
        raise SpaceError(f"{config.scheme.value} needs the BR/P0 pair, got {family.value}")
    if (config.pi1 or config.pi2) and disc.reconstruction is None:
        raise SpaceError(f"{config.scheme.value} needs a reconstruction operator")


def _mass_mode(reconstruct: bool) -> MassMode:
    return MassMode.PiPi if reconstruct else MassMode.IdId


def _load_mode(reconstruct: bool) -> LoadMode:
    return LoadMode.PI if reconstruct else LoadMode.ID


@dataclass(eq=False)
class KktSystem:
    """Eliminated block operator with an eps-affine right-hand side.

    ``rhs_for(eps) = rhs_base + eps * rhs_perturbation``. When
    ``perturbation_response`` is set, ``matrix @ perturbation_response``
    reproduces ``rhs_perturbation`` up to rounding and the solve only
    factors in ``rhs_base``.
    """

    matrix: sparse.csc_matrix
    rhs_base: np.ndarray
    rhs_perturbation: np.ndarray
    config: SchemeConfig
    data: ExampleData
    discretization: Discretization
    blocks: Dict[str, slice]
    coupling: Tuple[sparse.csr_matrix, sparse.csr_matrix]
    # exact solution for rhs_perturbation when it is known in closed form
    perturbation_response: Optional[np.ndarray] = None

    @property
    def rhs(self) -> np.ndarray:
        return self.rhs_for(self.config.eps)

    def rhs_for(self, eps: float) -> np.ndarray:
        return self.rhs_base + eps * self.rhs_perturbation

    @property
    def ndof(self) -> int:
        return self.matrix.shape[0]

    def block(self, row: str, col: str) -> sparse.csr_matrix:
        return self.matrix.tocsr()[self.blocks[row], :][:, self.blocks[col]]


def _block_layout(n_free: int, n_pressure: int) -> Dict[str, slice]:
    sizes = [("u", n_free), ("p", n_pressure), ("z", n_free), ("lambda", n_pressure), ("mu_p", 1), ("mu_lambda", 1)]
    layout, start = {}, 0
    for name, size in sizes:
        layout[name] = slice(start, start + size)
        start += size
    return layout


def build_system(disc: Discretization, config: SchemeConfig, data: ExampleData) -> KktSystem:
    _check_pairing(disc, config)
    start = time.perf_counter()
    s = config.scale
    velocity = disc.velocity
    free = velocity.free_dofs
    control, observation = data.control_region, data.observation_region

    mc1 = disc.mass(_mass_mode(config.pi2), control)
    mc2 = disc.mass(_mass_mode(config.pi1), observation)
    A = disc.laplacian[free][:, free]
    B = disc.divergence[:, free]
    c = sparse.csr_matrix(disc.mean_weights[:, None])

    matrix = sparse.bmat(
        [
            [config.nu * A, B.T, s * mc1[free][:, free], None, None, None],
            [B, None, None, None, c, None],
            [-s * mc2[free][:, free], None, config.nu * A, B.T, None, None],
            [None, None, B, None, None, c],
            [None, c.T, None, None, None, None],
            [None, None, None, c.T, None, None],
        ],
        format="csc",
    )

    n_free, n_p = len(free), disc.pressure.ndofs
    load_f = disc.load(data.body_force, _load_mode(config.pi2))
    load_u = disc.load(data.u, _load_mode(config.pi1), observation)

    layout = _block_layout(n_free, n_p)
    base = np.zeros(matrix.shape[0])
    base[layout["u"]] = load_f[free]
    base[layout["z"]] = -s * load_u[free]
    perturbation = np.zeros(matrix.shape[0])
    response = None
    potential = absorbed_potential(disc, config, data)
    if potential is None:
        load_pert = disc.load(data.perturbation, _load_mode(config.pi1), observation)
        perturbation[layout["z"]] = -s * load_pert[free]
    else:
        # (grad psi, Q v) = -(pi_Q psi, div v): only the adjoint pressure moves
        response = np.zeros(matrix.shape[0])
        response[layout["lambda"]] = s * potential
        perturbation[layout["z"]] = B.T @ response[layout["lambda"]]

    logger.info(
        f"{config.scheme.value} KKT system: {matrix.shape[0]} unknowns, nnz={matrix.nnz}, "
        f"built in {time.perf_counter() - start:.2f}s"
        + (", gradient perturbation absorbed by the adjoint pressure" if response is not None else "")
    )
    return KktSystem(
        matrix=matrix,
        rhs_base=base,
        rhs_perturbation=perturbation,
        config=config,
        data=data,
        discretization=disc,
        blocks=layout,
        coupling=(mc1, mc2),
        perturbation_response=response,
    )


def _one(x, y):
    return np.ones_like(x)


def absorbed_potential(disc: Discretization, config: SchemeConfig, data: ExampleData) -> Optional[np.ndarray]:
    """Zero-mean pi_Q psi when the perturbation grad psi is only observed through divergence-free tests.

    That holds for the whole-domain observation of the reconstructed schemes
    (div Pi v = pi_0 div v, Pi v . n = 0 on the boundary) and of the
    Scott-Vogelius pair. Then the perturbation load is B^T pi_Q psi up to
    sign, with no quadrature or rounding component outside the range of B^T.
    Returns None in every other case.
    """
    if data.perturbation_potential is None or data.observation_region is not RegionTag.WHOLE:
        return None
    if not (config.pi1 or disc.velocity.family is Family.P2):
        return None
    pressure = disc.pressure
    projected = interpolate(pressure, data.perturbation_potential)
    ones = interpolate(pressure, _one)
    weights = disc.mean_weights
    return projected - (weights @ projected) / (weights @ ones) * ones


def _diagnose_singular(matrix: sparse.spmatrix, blocks: Dict[str, slice]) -> str:
    csc = sparse.csc_matrix(matrix)
    csr = sparse.csr_matrix(matrix)
    empty_cols = np.flatnonzero(np.diff(csc.indptr) == 0)
    empty_rows = np.flatnonzero(np.diff(csr.indptr) == 0)
    for name, block in blocks.items():
        hits = [i for i in np.concatenate([empty_cols, empty_rows]) if block.start <= i < block.stop]
        if hits:
            return f"block '{name}' has an empty row/column at local index {hits[0] - block.start}"
    if "mu_p" in blocks:
        return (
            "zero pivot in the pressure/multiplier blocks; check the zero-mean "
            "constraints and that the control and observation regions are not empty"
        )
    return "zero pivot in the pressure block; check the zero-mean constraint"


@dataclass(eq=False)
class Factorization:
    matrix: sparse.csc_matrix
    lu: object
    tolerance: float
    seconds: float

    def solve(self, rhs: np.ndarray) -> Tuple[np.ndarray, float]:
        """Solve with a few steps of iterative refinement; returns (x, relative residual).

        Raises SolverError when the residual is still above the tolerance.
        """
        norm = np.linalg.norm(rhs)
        if norm == 0.0:
            return np.zeros_like(rhs), 0.0
        x = self.lu.solve(rhs)
        residual = np.linalg.norm(rhs - self.matrix @ x) / norm
        for _ in range(REFINEMENT_STEPS):
            if residual <= self.tolerance:
                break
            x = x + self.lu.solve(rhs - self.matrix @ x)
            residual = np.linalg.norm(rhs - self.matrix @ x) / norm
        if residual > self.tolerance:
            raise SolverError(
                f"relative residual {residual:.2e} above tolerance {self.tolerance:.1e} "
                f"after {REFINEMENT_STEPS} refinement steps"
            )
        return x, float(residual)


def factorize_matrix(
    matrix: sparse.spmatrix, blocks: Dict[str, slice], tolerance: float = DEFAULT_TOLERANCE
) -> Factorization:
    start = time.perf_counter()
    matrix = sparse.csc_matrix(matrix)
    try:
        lu = splu(matrix)
    except RuntimeError as exc:
        raise SolverError(f"singular system ({exc}): {_diagnose_singular(matrix, blocks)}") from exc
    seconds = time.perf_counter() - start
    logger.debug(f"LU of {matrix.shape[0]} unknowns in {seconds:.2f}s")
    return Factorization(matrix=matrix, lu=lu, tolerance=tolerance, seconds=seconds)


def factorize(system: KktSystem) -> Factorization:
    return factorize_matrix(system.matrix, system.blocks, system.config.tolerance)


@dataclass(frozen=True, eq=False)
class ControlField:
    """q_h coefficients in ``space``; only its restriction to ``region`` is the control."""

    space: FESpace
    coeffs: np.ndarray
    region: RegionTag


@dataclass(eq=False)
class SolutionFields:
    u: np.ndarray
    p: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    config: SchemeConfig
    discretization: Discretization
    residual: float = 0.0
    solve_seconds: float = 0.0
    q: Optional[ControlField] = field(default=None)

    @property
    def velocity_space(self) -> FESpace:
        return self.discretization.velocity

    @property
    def pressure_space(self) -> FESpace:
        return self.discretization.pressure


def _expand(values: np.ndarray, free: np.ndarray, ndofs: int) -> np.ndarray:
    out = np.zeros(ndofs)
    out[free] = values
    return out


def solve(
    system: KktSystem, factorization: Optional[Factorization] = None, eps: Optional[float] = None
) -> SolutionFields:
    """Solve for (u, p, z, lambda) and recover the control.

    ``eps`` overrides the configured perturbation amplitude; with a shared
    ``factorization`` an eps sweep needs a single LU.
    """
    start = time.perf_counter()
    if factorization is None:
        factorization = factorize(system)
    eps = system.config.eps if eps is None else eps
    if system.perturbation_response is None:
        x, residual = factorization.solve(system.rhs_for(eps))
    else:
        x, residual = factorization.solve(system.rhs_base)
        x = x + eps * system.perturbation_response

    disc, layout = system.discretization, system.blocks
    free, ndofs = disc.velocity.free_dofs, disc.velocity.ndofs
    fields = SolutionFields(
        u=_expand(x[layout["u"]], free, ndofs),
        p=x[layout["p"]].copy(),
        z=_expand(x[layout["z"]], free, ndofs),
        lam=x[layout["lambda"]].copy(),
        config=system.config,
        discretization=disc,
        residual=residual,
    )
    fields.q = recover_control(fields, system.config, system.data.control_region)
    fields.solve_seconds = time.perf_counter() - start
    return fields


def recover_control(
    fields: SolutionFields, config: SchemeConfig, region: RegionTag = RegionTag.WHOLE
) -> ControlField:
    """q_h = -alpha^(-1/2) Pi_2 z_h."""
    disc = fields.discretization
    if config.pi2:
        return ControlField(
            space=disc.reconstruction.target,
            coeffs=-config.scale * disc.reconstruction.apply(fields.z),
            region=region,
        )
    return ControlField(space=disc.velocity, coeffs=-config.scale * fields.z, region=region)


def solve_kkt(
    disc: Discretization, config: SchemeConfig, data: ExampleData
) -> SolutionFields:
    return solve(build_system(disc, config, data))


def solve_stokes(
    disc: Discretization, rhs: np.ndarray, nu: float = 1.0, tolerance: float = DEFAULT_TOLERANCE
) -> Tuple[np.ndarray, np.ndarray]:
    """Homogeneous Dirichlet Stokes solve for an assembled velocity load vector."""
    free = disc.velocity.free_dofs
    A = disc.laplacian[free][:, free]
    B = disc.divergence[:, free]
    c = sparse.csr_matrix(disc.mean_weights[:, None])
    matrix = sparse.bmat([[nu * A, B.T, None], [B, None, c], [None, c.T, None]], format="csc")
    n_free, n_p = len(free), disc.pressure.ndofs
    blocks = {"u": slice(0, n_free), "p": slice(n_free, n_free + n_p), "mu_p": slice(n_free + n_p, n_free + n_p + 1)}
    b = np.zeros(matrix.shape[0])
    b[blocks["u"]] = rhs[free]
    x, _ = factorize_matrix(matrix, blocks, tolerance).solve(b)
    return _expand(x[blocks["u"]], free, disc.velocity.ndofs), x[blocks["p"]].copy()


def solve_forward_stokes(
    disc: Discretization,
    body_force: Field,
    rhs_mode: LoadMode = LoadMode.ID,
    nu: float = 1.0,
    tolerance: float = DEFAULT_TOLERANCE,
) -> Tuple[np.ndarray, np.ndarray]:
    """Plain Stokes solve with the body force tested against phi or Pi phi."""
    rhs = disc.load(body_force, LoadMode(rhs_mode))
    return solve_stokes(disc, rhs, nu, tolerance)


def objective(fields: SolutionFields, data: ExampleData, eps: float) -> float:
    """0.5 ||Pi_1 u_h - u_d||^2 on the observation region + 0.5 alpha ||q_h||^2 on the control region."""
    config = fields.config
    disc = fields.discretization
    mesh = disc.mesh
    if config.pi1:
        state = DiscreteField(disc.reconstruction.target, disc.reconstruction.apply(fields.u))
    else:
        state = DiscreteField(disc.velocity, fields.u)
    tracking = l2_distance(state, AnalyticField(data.desired_state(eps)), mesh, data.observation_region)
    control = l2_norm(DiscreteField(fields.q.space, fields.q.coeffs), mesh, data.control_region)
    return 0.5 * tracking**2 + 0.5 * config.alpha * control**2
