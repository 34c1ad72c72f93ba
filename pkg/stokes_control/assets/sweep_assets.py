"""Convergence sweep asset: solves, error reports, CSV and warehouse table."""

import math
from pathlib import Path

import pandas as pd
from dagster import AssetExecutionContext, Output, asset

from stokes_control.config import RunConfig, validate_run_config
from stokes_control.resources import DuckDBResource, ReferenceCacheResource
from stokes_control.sweep import reports_frame, run_example, write_csv

CSV_NAME = "error_report.csv"


@asset(
    description="Error reports of every (example, scheme, n, nu, alpha, eps) against the references",
    group_name="sweep",
)
def error_reports(
    context: AssetExecutionContext,
    config: RunConfig,
    reference_solutions: pd.DataFrame,
    reference_cache: ReferenceCacheResource,
    duckdb: DuckDBResource,
) -> Output[pd.DataFrame]:
    validate_run_config(config)
    loaded = {}

    def load_reference(example, nu, alpha):
        key = (example, nu, alpha)
        if key not in loaded:
            loaded[key] = reference_cache.load(
                example, nu, alpha, config.reference_level, config.assembly_degree, config.data_degree
            )
        return loaded[key]

    context.log.info(
        f"Sweeping {len(config.examples)} examples x {len(config.schemes)} schemes x "
        f"{len(config.levels)} levels x {len(config.nu)} nu x {len(config.alpha)} alpha x {len(config.eps)} eps"
    )
    frame = reports_frame(run_example(config, load_reference))

    csv_path = write_csv(frame, Path(config.output_dir) / CSV_NAME)
    rows = duckdb.read_csv_to_table(str(csv_path), "error_reports")
    context.log.info(f"Wrote {rows} rows to {csv_path} and table error_reports")

    last_rates = frame.groupby(["example", "scheme", "nu", "alpha", "eps"])["eoc_energy"].last()
    worst = float(last_rates.min()) if last_rates.notna().any() else math.nan
    return Output(
        frame,
        metadata={
            "rows": len(frame),
            "csv_path": str(csv_path),
            "worst_final_energy_eoc": worst,
            "total_solve_seconds": float(frame["solve_seconds"].sum()),
        },
    )


def get_assets():
    return [error_reports]
