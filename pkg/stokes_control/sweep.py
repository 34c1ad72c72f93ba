"""Parameter sweeps over examples, schemes and mesh levels."""

from __future__ import annotations

import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Tuple, Union

import pandas as pd
from dagster import get_dagster_logger

from stokes_control.analysis import CSV_COLUMNS, ErrorReport, ReferenceSolution, attach_eoc, energy_error
from stokes_control.assembly import Discretization
from stokes_control.config import RunConfig
from stokes_control.kkt_solver import Scheme, SchemeConfig, build_discretization, build_system, factorize, solve
from stokes_control.mesh import build_unit_square
from stokes_control.problems import Example, example_data

logger = get_dagster_logger(__name__)

ReferenceLoader = Callable[[int, float, float], ReferenceSolution]

TABLE_COLUMNS = [
    ("scheme", "scheme", ""),
    ("eps", "eps", "g"),
    ("n", "n", "g"),
    ("err_energy", "energy error", ".3e"),
    ("eoc_energy", "energy eoc", ".2f"),
    ("err_u_l2", "velocity L2 error", ".3e"),
    ("eoc_u_l2", "velocity eoc", ".2f"),
    ("err_q_l2", "control error", ".3e"),
    ("eoc_q", "control eoc", ".2f"),
]


def run_example(config: RunConfig, load_reference: ReferenceLoader) -> List[ErrorReport]:
    """Solve every (example, scheme, n, nu, alpha, eps) and compare with the references.

    One LU factorization serves all eps values of a (scheme, n, nu, alpha).
    """
    reports: List[ErrorReport] = []
    discretizations: Dict[Tuple[int, int, str], Discretization] = {}

    for example in config.examples:
        example = Example(example)
        meshes = {n: build_unit_square(n, require_aligned_regions=example is Example.EX2) for n in config.levels}
        for nu in config.nu:
            data = example_data(example, nu)
            for alpha in config.alpha:
                reference = load_reference(int(example), nu, alpha)
                for scheme_name in config.schemes:
                    scheme = Scheme(scheme_name)
                    for n in config.levels:
                        key = (int(example), n, scheme.value)
                        if key not in discretizations:
                            discretizations[key] = build_discretization(
                                meshes[n], scheme, config.assembly_degree, config.data_degree, config.threads
                            )
                        disc = discretizations[key]
                        scheme_config = SchemeConfig(
                            scheme, nu=nu, alpha=alpha, eps=0.0, example=example, tolerance=config.tolerance
                        )
                        start = time.perf_counter()
                        system = build_system(disc, scheme_config, data)
                        factorization = factorize(system)
                        setup = time.perf_counter() - start
                        for eps in config.eps:
                            fields = solve(system, factorization, eps)
                            fields.config = replace(scheme_config, eps=eps)
                            fields.solve_seconds += setup / len(config.eps)
                            report = energy_error(fields, reference, n, data.control_region)
                            reports.append(report)
                        logger.info(
                            f"ex{int(example)} {scheme.value} n={n} nu={nu:g} alpha={alpha:g}: "
                            f"{system.ndof} unknowns, energy error {report.err_energy:.3e}"
                        )
    return attach_eoc(reports)


def reports_frame(reports: List[ErrorReport]) -> pd.DataFrame:
    frame = pd.DataFrame([r.as_row() for r in reports], columns=CSV_COLUMNS)
    if frame.empty:
        return frame
    order = {name: i for i, name in enumerate(s.value for s in Scheme)}
    frame["_scheme_order"] = frame["scheme"].map(order)
    frame = frame.sort_values(
        ["example", "_scheme_order", "nu", "alpha", "eps", "n"],
        ascending=[True, True, False, False, True, True],
    )
    return frame.drop(columns="_scheme_order").reset_index(drop=True)


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, columns=CSV_COLUMNS, float_format="%.10g")
    return path


def markdown_tables(frame: pd.DataFrame) -> Dict[str, str]:
    """One table per (example, nu, alpha): energy, velocity and control errors with rates."""
    columns = [column for column, _, _ in TABLE_COLUMNS]
    titles = {column: title for column, title, _ in TABLE_COLUMNS}
    formats = [fmt for _, _, fmt in TABLE_COLUMNS]
    tables = {}
    for (example, nu, alpha), group in frame.groupby(["example", "nu", "alpha"], sort=False):
        shown = group[columns].astype(object)
        # undefined rates become None so tabulate prints missingval
        shown = shown.where(group[columns].notna(), None).rename(columns=titles)
        title = f"ex{example}_nu{nu:g}_alpha{alpha:g}"
        tables[title] = (
            f"## Example {example}, nu = {nu:g}, alpha = {alpha:g}\n\n"
            + shown.to_markdown(index=False, floatfmt=formats, missingval="-")
            + "\n"
        )
    return tables


def write_markdown(tables: Dict[str, str], directory: Union[str, Path]) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for title, text in tables.items():
        path = directory / f"{title}.md"
        path.write_text(text)
        paths.append(path)
    return paths
