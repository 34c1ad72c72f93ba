"""Fine-grid Scott-Vogelius reference solutions and their on-disk format.

A reference directory holds ``u.txt``, ``p.txt``, ``z.txt`` and
``lambda.txt`` in the coefficient text format plus a one-line
``manifest.txt``. The mesh is not stored; it is rebuilt from the level.
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Dict, Union

from dagster import get_dagster_logger

from stokes_control.analysis import ReferenceSolution
from stokes_control.errors import ReferenceCacheError, SolverError, StokesControlError
from stokes_control.fe_spaces import read_coefficients, write_coefficients
from stokes_control.kkt_solver import Scheme, SchemeConfig, build_discretization, build_system, solve
from stokes_control.mesh import build_unit_square
from stokes_control.problems import Example, example_data
from stokes_control.quadrature import ASSEMBLY_DEGREE, DATA_DEGREE

logger = get_dagster_logger(__name__)


def reference_key(example: int, nu: float, alpha: float, level: int) -> str:
    return f"ex{int(example)}_nu{float(nu)!r}_alpha{float(alpha)!r}_n{int(level)}"


def reference_discretization(
    example: int, level: int, degree: int = ASSEMBLY_DEGREE, data_degree: int = DATA_DEGREE, threads: int = 1
):
    mesh = build_unit_square(level, require_aligned_regions=Example(example) is Example.EX2)
    return build_discretization(mesh, Scheme.SCOTT_VOGELIUS, degree, data_degree, threads)


def generate_reference(
    example: int,
    nu: float,
    alpha: float,
    level: int,
    tolerance: float = 1e-10,
    degree: int = ASSEMBLY_DEGREE,
    data_degree: int = DATA_DEGREE,
    threads: int = 1,
) -> ReferenceSolution:
    """Scott-Vogelius solve at eps = 0 on the barycentric split of the level mesh."""
    start = time.perf_counter()
    disc = reference_discretization(example, level, degree, data_degree, threads)
    config = SchemeConfig(Scheme.SCOTT_VOGELIUS, nu=nu, alpha=alpha, eps=0.0, example=example, tolerance=tolerance)
    try:
        fields = solve(build_system(disc, config, example_data(example, nu)))
    except SolverError as exc:
        raise SolverError(
            f"reference solve failed for example={example} nu={nu} alpha={alpha} level={level}: {exc}"
        ) from exc
    logger.info(
        f"reference {reference_key(example, nu, alpha, level)}: {disc.velocity.ndofs} velocity dofs "
        f"in {time.perf_counter() - start:.1f}s"
    )
    return ReferenceSolution(
        discretization=disc,
        u=fields.u,
        p=fields.p,
        z=fields.z,
        lam=fields.lam,
        example=Example(example),
        nu=float(nu),
        alpha=float(alpha),
        level=int(level),
    )


def _manifest_line(reference: ReferenceSolution) -> str:
    return (
        f"scheme={reference.scheme.value} example={int(reference.example)} nu={reference.nu!r} "
        f"alpha={reference.alpha!r} level={reference.level} "
        f"velocity_dofs={reference.space.ndofs} pressure_dofs={reference.discretization.pressure.ndofs}"
    )


def parse_manifest(path: Union[str, Path]) -> Dict[str, str]:
    try:
        text = Path(path).read_text().strip()
        return dict(item.split("=", 1) for item in text.split())
    except (OSError, ValueError) as exc:
        raise ReferenceCacheError(f"unreadable manifest {path}: {exc}") from exc


def write_reference(reference: ReferenceSolution, directory: Union[str, Path]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    velocity, pressure = reference.space, reference.discretization.pressure
    level = reference.level
    write_coefficients(velocity, reference.u, directory / "u.txt", level)
    write_coefficients(pressure, reference.p, directory / "p.txt", level)
    write_coefficients(velocity, reference.z, directory / "z.txt", level)
    write_coefficients(pressure, reference.lam, directory / "lambda.txt", level)
    (directory / "manifest.txt").write_text(_manifest_line(reference) + "\n")


def read_reference(
    directory: Union[str, Path], degree: int = ASSEMBLY_DEGREE, data_degree: int = DATA_DEGREE
) -> ReferenceSolution:
    directory = Path(directory)
    manifest = parse_manifest(directory / "manifest.txt")
    try:
        example = int(manifest["example"])
        level = int(manifest["level"])
        nu, alpha = float(manifest["nu"]), float(manifest["alpha"])
        scheme = manifest["scheme"]
    except (KeyError, ValueError) as exc:
        raise ReferenceCacheError(f"incomplete manifest in {directory}: {exc}") from exc
    disc = reference_discretization(example, level, degree, data_degree)
    try:
        u = read_coefficients(disc.velocity, directory / "u.txt")
        p = read_coefficients(disc.pressure, directory / "p.txt")
        z = read_coefficients(disc.velocity, directory / "z.txt")
        lam = read_coefficients(disc.pressure, directory / "lambda.txt")
    except (OSError, IndexError, ValueError, StokesControlError) as exc:
        raise ReferenceCacheError(f"corrupt reference in {directory}: {exc}") from exc
    return ReferenceSolution(
        discretization=disc,
        u=u,
        p=p,
        z=z,
        lam=lam,
        example=Example(example),
        nu=nu,
        alpha=alpha,
        level=level,
        scheme=Scheme(scheme),
    )
