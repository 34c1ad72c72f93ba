"""Property suite: pressure-robustness, eps behaviour, projector and reconstruction checks.

Each check returns one or more :class:`CheckResult` rows; nothing here raises
on a failed property, so a whole suite always reports.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from dagster import get_dagster_logger

from stokes_control.analysis import (
    discrete_divergence_free_samples,
    dual_norm_gradient,
    eoc,
    h1_error,
    l2_error,
    max_divergence,
    pressure_projection_error,
    reconstruction_error,
    relative_difference,
    stokes_projector,
)
from stokes_control.assembly import Discretization, LoadMode, assemble_gradient_load
from stokes_control.fe_spaces import interpolate
from stokes_control.kkt_solver import (
    Scheme,
    SchemeConfig,
    SolutionFields,
    build_discretization,
    build_system,
    factorize,
    objective,
    solve,
    solve_forward_stokes,
)
from stokes_control.mesh import build_unit_square
from stokes_control.norms import AnalyticField
from stokes_control.problems import (
    Example,
    exact_control,
    example_data,
    gradient_force,
    gradient_potential,
    velocity,
    velocity_gradient,
)

logger = get_dagster_logger(__name__)

CHECK_COLUMNS = ["name", "passed", "value", "threshold", "detail"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


def _at_most(name: str, value: float, threshold: float, detail: str = "") -> CheckResult:
    return CheckResult(name, bool(value <= threshold), float(value), float(threshold), detail)


def _at_least(name: str, value: float, threshold: float, detail: str = "") -> CheckResult:
    return CheckResult(name, bool(value >= threshold), float(value), float(threshold), detail)


def _within(name: str, value: float, target: float, spread: float, detail: str = "") -> CheckResult:
    passed = math.isfinite(value) and abs(value - target) <= spread
    return CheckResult(name, bool(passed), float(value), float(spread), f"target {target:g}; {detail}".rstrip("; "))


def _energy(disc: Discretization, coeffs: np.ndarray) -> float:
    return float(np.sqrt(max(coeffs @ (disc.laplacian @ coeffs), 0.0)))


class _Levels:
    """Discretizations of Example 1 meshes, built once per (n, scheme)."""

    def __init__(self, degree: int, data_degree: int, threads: int):
        self.degree, self.data_degree, self.threads = degree, data_degree, threads
        self._cache: Dict = {}

    def get(self, n: int, scheme: Scheme, aligned: bool = False) -> Discretization:
        key = (n, Scheme(scheme), aligned)
        if key not in self._cache:
            mesh = build_unit_square(n, require_aligned_regions=aligned)
            self._cache[key] = build_discretization(mesh, scheme, self.degree, self.data_degree, self.threads)
        return self._cache[key]


def check_gradient_force(levels: Sequence[int], discs: _Levels) -> List[CheckResult]:
    robust, classical = [], []
    for n in levels:
        disc = discs.get(n, Scheme.CLASSICAL)
        u_pi, _ = solve_forward_stokes(disc, gradient_force, LoadMode.PI)
        u_id, _ = solve_forward_stokes(disc, gradient_force, LoadMode.ID)
        robust.append(_energy(disc, u_pi))
        classical.append(_energy(disc, u_id))
    rates = eoc(classical)
    return [
        _at_most("gradient_force.robust_velocity", max(robust), 1e-8, f"levels {list(levels)}"),
        _at_least("gradient_force.classical_velocity", classical[0], 1e-3, f"n={levels[0]}"),
        _within("gradient_force.classical_eoc", rates[-1] if rates else math.nan, 1.0, 0.3),
    ]


def _stacked(fields: SolutionFields) -> np.ndarray:
    return np.concatenate([fields.u, fields.z, fields.q.coeffs])


def check_eps_invariance(n: int, discs: _Levels, nu: float = 1e-3, alpha: float = 1e-3) -> List[CheckResult]:
    data = example_data(Example.EX1, nu)
    results = []
    for scheme in Scheme:
        disc = discs.get(n, scheme)
        system = build_system(disc, SchemeConfig(scheme, nu=nu, alpha=alpha), data)
        lu = factorize(system)
        base, perturbed = solve(system, lu, 0.0), solve(system, lu, 1.0)
        diffs = {
            "u": relative_difference(base.u, perturbed.u),
            "z": relative_difference(base.z, perturbed.z),
            "q": relative_difference(base.q.coeffs, perturbed.q.coeffs),
        }
        if scheme in (Scheme.FULL_ROBUST, Scheme.SCOTT_VOGELIUS):
            results.append(_at_most(f"eps_invariance.{scheme.value}", max(diffs.values()), 1e-8, f"n={n}"))
        elif scheme is Scheme.CLASSICAL:
            results.append(_at_least(f"eps_invariance.{scheme.value}_differs", diffs["z"], 1e-3, f"n={n}"))
        else:
            results.append(
                CheckResult(f"eps_invariance.{scheme.value}", True, diffs["z"], math.nan, "reported only")
            )
    return results


def check_eps_linearity(
    n: int, discs: _Levels, nu_values: Sequence[float], alpha_values: Sequence[float], eps: float = 1e-4
) -> List[CheckResult]:
    worst = 0.0
    for scheme in Scheme:
        disc = discs.get(n, scheme)
        for nu in nu_values:
            data = example_data(Example.EX1, nu)
            for alpha in alpha_values:
                system = build_system(disc, SchemeConfig(scheme, nu=nu, alpha=alpha), data)
                lu = factorize(system)
                s0, s1, se = (_stacked(solve(system, lu, e)) for e in (0.0, 1.0, eps))
                scale = np.linalg.norm(s1 - s0)
                if scale > 0:
                    worst = max(worst, np.linalg.norm((se - s0) - eps * (s1 - s0)) / scale)
    return [_at_most("eps_linearity", worst, 1e-9, f"n={n}, all schemes")]


def check_projector_and_reconstruction(levels: Sequence[int], discs: _Levels, samples: int) -> List[CheckResult]:
    exact = AnalyticField(velocity, velocity_gradient)
    projector_errors, reconstruction_errors = [], []
    worst_orthogonality, worst_divergence = 0.0, 0.0
    for n in levels:
        disc = discs.get(n, Scheme.FULL_ROBUST)
        space, op = disc.velocity, disc.reconstruction
        projection = stokes_projector(disc, velocity_gradient)
        projector_errors.append(l2_error(space, projection, exact))
        reconstruction_errors.append(reconstruction_error(op, interpolate(space, velocity)))

        load = assemble_gradient_load(space, velocity_gradient, disc.data_degree)
        for v in discrete_divergence_free_samples(disc, samples, seed=n):
            v = v / max(_energy(disc, v), 1e-300)
            worst_orthogonality = max(worst_orthogonality, abs(load @ v - projection @ (disc.laplacian @ v)))
            worst_divergence = max(worst_divergence, max_divergence(op.target, op.apply(v)))

    projector_rates = eoc(projector_errors)
    reconstruction_rates = eoc(reconstruction_errors)
    return [
        _at_most("projector.orthogonality", worst_orthogonality, 1e-9, f"{samples} samples per level"),
        _within("projector.l2_eoc", projector_rates[-1] if projector_rates else math.nan, 2.0, 0.3),
        _at_least("reconstruction.l2_eoc", reconstruction_rates[-1] if reconstruction_rates else math.nan, 0.9),
        _at_most("reconstruction.divergence", worst_divergence, 1e-11, f"{samples} samples per level"),
    ]


def check_dual_norm(levels: Sequence[int], discs: _Levels) -> List[CheckResult]:
    br_values, margins, sv_values = [], [], []
    for n in levels:
        br = discs.get(n, Scheme.CLASSICAL)
        value = dual_norm_gradient(br, gradient_potential)
        br_values.append(value)
        margins.append(value - pressure_projection_error(br, gradient_potential))
        sv_values.append(dual_norm_gradient(discs.get(n, Scheme.SCOTT_VOGELIUS), gradient_potential))
    rates = eoc(br_values)
    return [
        _at_most("dual_norm.scott_vogelius", max(sv_values), 1e-9),
        _at_most("dual_norm.bounded_by_projection", max(margins), 1e-9),
        _within("dual_norm.eoc", rates[-1] if rates else math.nan, 1.0, 0.3),
    ]


def check_forward_example(levels: Sequence[int], discs: _Levels, nu: float = 1.0) -> List[CheckResult]:
    """Stokes solve driven by the exact control of Example 1 must converge to u."""
    exact = AnalyticField(velocity, velocity_gradient)
    force = exact_control(example_data(Example.EX1, nu))
    errors = []
    for n in levels:
        disc = discs.get(n, Scheme.CLASSICAL)
        u, _ = solve_forward_stokes(disc, force, LoadMode.ID, nu=nu)
        errors.append(h1_error(disc.velocity, u, exact))
    rates = eoc(errors)
    return [_within("forward_example.h1_eoc", rates[-1] if rates else math.nan, 1.0, 0.3)]


def check_objective(n: int, discs: _Levels, nu: float = 1.0, alpha: float = 1e-1) -> List[CheckResult]:
    data = example_data(Example.EX1, nu)
    disc = discs.get(n, Scheme.FULL_ROBUST)
    fields = solve(build_system(disc, SchemeConfig(Scheme.FULL_ROBUST, nu=nu, alpha=alpha), data))
    value = objective(fields, data, 0.0)
    return [CheckResult("objective.full_robust", bool(math.isfinite(value) and value >= 0), value, 0.0, f"n={n}")]


def run_checks(
    levels: Sequence[int] = (10, 20, 40),
    nu_values: Sequence[float] = (1.0, 1e-3),
    alpha_values: Sequence[float] = (1e-1, 1e-3, 1e-4, 1e-6),
    samples: int = 20,
    invariance_level: Optional[int] = None,
    degree: int = 8,
    data_degree: int = 12,
    threads: int = 1,
    log: Callable[[str], None] = logger.info,
) -> pd.DataFrame:
    levels = list(levels)
    if invariance_level is None:
        invariance_level = 20 if 20 in levels else levels[-1]
    discs = _Levels(degree, data_degree, threads)
    suites = [
        ("gradient force", lambda: check_gradient_force(levels, discs)),
        ("eps invariance", lambda: check_eps_invariance(invariance_level, discs)),
        ("eps linearity", lambda: check_eps_linearity(levels[0], discs, nu_values, alpha_values)),
        ("projector/reconstruction", lambda: check_projector_and_reconstruction(levels, discs, samples)),
        ("dual norm", lambda: check_dual_norm(levels, discs)),
        ("forward example", lambda: check_forward_example(levels, discs)),
        ("objective", lambda: check_objective(levels[0], discs)),
    ]
    results: List[CheckResult] = []
    for title, suite in suites:
        rows = suite()
        failed = [r.name for r in rows if not r.passed]
        log(f"{title}: {len(rows) - len(failed)}/{len(rows)} passed" + (f" (failed: {failed})" if failed else ""))
        results.extend(rows)
    return pd.DataFrame([asdict(r) for r in results], columns=CHECK_COLUMNS)
