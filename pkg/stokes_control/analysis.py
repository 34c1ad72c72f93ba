"""Error quantities, convergence rates and consistency diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields as dataclass_fields
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from dagster import get_dagster_logger

from stokes_control.assembly import (
    Discretization,
    LoadMode,
    assemble_divergence_load,
    assemble_gradient_load,
)
from stokes_control.errors import ReferenceCacheError
from stokes_control.fe_spaces import FESpace, Family, eval_basis, interpolate
from stokes_control.kkt_solver import Scheme, SolutionFields, solve_stokes
from stokes_control.mesh import RegionTag
from stokes_control.norms import AnalyticField, DiscreteField, Sampled, h1_distance, l2_distance, l2_norm
from stokes_control.problems import Example
from stokes_control.quadrature import ASSEMBLY_DEGREE, triangle_rule
from stokes_control.reconstruction import ReconstructionOperator

logger = get_dagster_logger(__name__)


@dataclass
class ErrorReport:
    example: int
    scheme: str
    n: int
    h: float
    ndof: int
    nu: float
    alpha: float
    eps: float
    err_energy: float
    err_u_h1: float
    err_u_l2: float
    err_z_h1: float
    err_q_l2: float
    eoc_energy: float = math.nan
    eoc_u_l2: float = math.nan
    eoc_q: float = math.nan
    solve_seconds: float = 0.0

    def as_row(self) -> Dict[str, object]:
        row = asdict(self)
        return {name: row[name] for name in CSV_COLUMNS}


CSV_COLUMNS = [f.name for f in dataclass_fields(ErrorReport)]


@dataclass(eq=False)
class ReferenceSolution:
    """Fine-grid Scott-Vogelius solution at eps = 0."""

    discretization: Discretization
    u: np.ndarray
    p: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    example: Example
    nu: float
    alpha: float
    level: int
    scheme: Scheme = Scheme.SCOTT_VOGELIUS

    def __post_init__(self):
        if Scheme(self.scheme) is not Scheme.SCOTT_VOGELIUS:
            raise ReferenceCacheError(f"references must come from ScottVogelius, got {self.scheme}")
        if self.discretization.velocity.family is not Family.P2:
            raise ReferenceCacheError("reference velocity must live in P2_velocity")

    @property
    def space(self) -> FESpace:
        return self.discretization.velocity

    @property
    def u_field(self) -> DiscreteField:
        return DiscreteField(self.space, self.u)

    @property
    def z_field(self) -> DiscreteField:
        return DiscreteField(self.space, self.z)

    @property
    def q_field(self) -> DiscreteField:
        return DiscreteField(self.space, -(self.alpha**-0.5) * self.z)

    @property
    def p_field(self) -> DiscreteField:
        return DiscreteField(self.discretization.pressure, self.p)


@dataclass(frozen=True, eq=False)
class AnalyticReference:
    """Analytic comparison fields; a missing field compares against zero."""

    u_field: Optional[AnalyticField] = None
    z_field: Optional[AnalyticField] = None
    q_field: Optional[AnalyticField] = None


Reference = Union[ReferenceSolution, AnalyticReference]


def l2_error(space: FESpace, coeffs: np.ndarray, reference: Sampled, region=RegionTag.WHOLE) -> float:
    return l2_distance(DiscreteField(space, coeffs), reference, space.mesh, region)


def h1_error(space: FESpace, coeffs: np.ndarray, reference: Sampled, region=RegionTag.WHOLE) -> float:
    return h1_distance(DiscreteField(space, coeffs), reference, space.mesh, region)


def energy_error(
    fields: SolutionFields,
    reference: Reference,
    n: Optional[int] = None,
    control_region: RegionTag = RegionTag.WHOLE,
) -> ErrorReport:
    """Errors of one solve; rates are filled in later by :func:`attach_eoc`."""
    config = fields.config
    disc = fields.discretization
    space = disc.velocity
    err_u_h1 = h1_error(space, fields.u, reference.u_field)
    err_z_h1 = h1_error(space, fields.z, reference.z_field)
    err_u_l2 = l2_error(space, fields.u, reference.u_field)
    q = fields.q
    err_q_l2 = l2_distance(DiscreteField(q.space, q.coeffs), reference.q_field, space.mesh, control_region)

    n = n if n is not None else (disc.mesh.cells_per_side or 0)
    h = math.sqrt(2.0) / n if n else disc.mesh.h
    return ErrorReport(
        example=int(config.example),
        scheme=config.scheme.value,
        n=int(n),
        h=float(h),
        ndof=int(2 * len(space.free_dofs) + 2 * disc.pressure.ndofs + 2),
        nu=float(config.nu),
        alpha=float(config.alpha),
        eps=float(config.eps),
        err_energy=float(math.hypot(err_u_h1, err_z_h1)),
        err_u_h1=err_u_h1,
        err_u_l2=err_u_l2,
        err_z_h1=err_z_h1,
        err_q_l2=err_q_l2,
        solve_seconds=float(fields.solve_seconds),
    )


def eoc(errors: Sequence[float], hs: Optional[Sequence[float]] = None) -> List[float]:
    """Rates between consecutive levels; NaN where a rate is undefined."""
    errors = [float(e) for e in errors]
    if hs is None:
        hs = [2.0**-i for i in range(len(errors))]
    rates = []
    for (e0, e1), (h0, h1) in zip(zip(errors, errors[1:]), zip(hs, hs[1:])):
        if e0 <= 0 or e1 <= 0 or h0 <= 0 or h1 <= 0 or h0 == h1 or not (math.isfinite(e0) and math.isfinite(e1)):
            rates.append(math.nan)
        else:
            rates.append(math.log(e0 / e1) / math.log(h0 / h1))
    return rates


def attach_eoc(reports: Iterable[ErrorReport]) -> List[ErrorReport]:
    """Fill eoc_* columns against the previous level of the same parameter set."""
    reports = list(reports)
    groups: Dict[Tuple, List[ErrorReport]] = {}
    for report in reports:
        key = (report.example, report.scheme, report.nu, report.alpha, report.eps)
        groups.setdefault(key, []).append(report)
    for group in groups.values():
        group.sort(key=lambda r: r.n)
        hs = [r.h for r in group]
        for column, source in (("eoc_energy", "err_energy"), ("eoc_u_l2", "err_u_l2"), ("eoc_q", "err_q_l2")):
            rates = eoc([getattr(r, source) for r in group], hs)
            for report, rate in zip(group[1:], rates):
                setattr(report, column, rate)
    return reports


def stokes_projector(disc: Discretization, w: Union[Callable, np.ndarray]) -> np.ndarray:
    """Discrete Stokes projection S_h w.

    ``w`` is either the analytic gradient of w ([component, derivative]
    layout) or a coefficient vector of the velocity space.
    """
    if callable(w):
        rhs = assemble_gradient_load(disc.velocity, w, disc.data_degree)
    else:
        rhs = disc.laplacian @ np.asarray(w, dtype=float)
    u, _ = solve_stokes(disc, rhs)
    return u


def _energy(disc: Discretization, coeffs: np.ndarray) -> float:
    return float(np.sqrt(max(coeffs @ (disc.laplacian @ coeffs), 0.0)))


def dual_norm_gradient(disc: Discretization, psi: Callable) -> float:
    """Norm of grad psi in the dual of the discretely divergence-free space."""
    rhs = assemble_divergence_load(disc.velocity, psi, disc.data_degree)
    w, _ = solve_stokes(disc, rhs)
    return _energy(disc, w)


def reconstruction_consistency(
    disc: Discretization, g: Callable, identity_reconstruction: bool = False
) -> float:
    """sup over the discretely divergence-free space of (g, (1 - Pi) v) / ||grad v||."""
    if identity_reconstruction or disc.reconstruction is None:
        return 0.0
    rhs = disc.load(g, LoadMode.ID) - disc.load(g, LoadMode.PI)
    w, _ = solve_stokes(disc, rhs)
    return _energy(disc, w)


def pythagoras_split(
    disc: Discretization, grad_u: Callable, u_h: np.ndarray
) -> Tuple[float, float, float]:
    """Squared terms (|u - u_h|, |u - S_h u|, |S_h u - u_h|) in the H1 seminorm."""
    projection = stokes_projector(disc, grad_u)
    exact = AnalyticField(value=lambda x, y: np.zeros(np.shape(x) + (2,)), gradient=grad_u)
    space = disc.velocity
    total = h1_error(space, u_h, exact) ** 2
    best = h1_error(space, projection, exact) ** 2
    discrete = _energy(disc, projection - u_h) ** 2
    return total, best, discrete


def reconstruction_error(op: ReconstructionOperator, coeffs: np.ndarray) -> float:
    """||v_h - Pi v_h|| in L2."""
    return l2_distance(
        DiscreteField(op.source, coeffs),
        DiscreteField(op.target, op.apply(coeffs)),
        op.source.mesh,
    )


def pressure_projection_error(disc: Discretization, psi: Callable) -> float:
    """||psi - pi_Q psi|| with pi_Q the L2 projection onto the pressure space."""
    pressure = disc.pressure
    return l2_distance(AnalyticField(psi), DiscreteField(pressure, interpolate(pressure, psi)), pressure.mesh)


def max_divergence(space: FESpace, coeffs: np.ndarray, degree: int = ASSEMBLY_DEGREE) -> float:
    """Largest |div v| over all quadrature points."""
    rule = triangle_rule(degree)
    div = eval_basis(space, rule.barycentric).div
    local = np.asarray(coeffs)[space.dofs]
    return float(np.abs(np.einsum("tqb,tb->tq", div, local)).max())


def discrete_divergence_free_samples(
    disc: Discretization, count: int, seed: int = 0
) -> np.ndarray:
    """Random members of the discretely divergence-free space with zero boundary dofs.

    Random velocity loads are pushed through the Stokes solve, whose velocity
    is discretely divergence-free by construction. Returns (count, ndofs).
    """
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(count):
        rhs = rng.standard_normal(disc.velocity.ndofs)
        u, _ = solve_stokes(disc, rhs)
        samples.append(u)
    return np.array(samples)


def pressure_mean(disc: Discretization, p: np.ndarray) -> float:
    return float(disc.mean_weights @ p)


def control_norm(fields: SolutionFields, region: RegionTag = RegionTag.WHOLE) -> float:
    return l2_norm(DiscreteField(fields.q.space, fields.q.coeffs), fields.discretization.mesh, region)


def relative_difference(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)
