"""Property suite as an asset."""

import pandas as pd
from dagster import AssetExecutionContext, Output, asset

from stokes_control.checks import run_checks
from stokes_control.config import RunConfig, validate_run_config
from stokes_control.resources import DuckDBResource


@asset(
    description="Pressure-robustness, eps and projector/reconstruction property checks",
    group_name="checks",
)
def invariant_checks(
    context: AssetExecutionContext,
    config: RunConfig,
    duckdb: DuckDBResource,
) -> Output[pd.DataFrame]:
    validate_run_config(config)
    results = run_checks(
        levels=config.levels,
        nu_values=config.nu,
        alpha_values=config.alpha,
        degree=config.assembly_degree,
        data_degree=config.data_degree,
        threads=config.threads,
        log=context.log.info,
    )
    duckdb.write_dataframe(results, "invariant_checks")

    failed = results.loc[~results["passed"], "name"].tolist()
    if failed:
        context.log.warning(f"Failed checks: {failed}")
    return Output(
        results,
        metadata={
            "checks": len(results),
            "passed": int(results["passed"].sum()),
            "failed": len(failed),
        },
    )


def get_assets():
    return [invariant_checks]
