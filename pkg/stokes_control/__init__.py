"""Pressure-robust discretizations of Stokes optimal control, as a Dagster project."""

from dagster import Definitions

from stokes_control.assets import check_assets, reference_assets, report_assets, sweep_assets
from stokes_control.jobs import check_job, reference_job, sweep_job
from stokes_control.resources import DuckDBResource, ReferenceCacheResource


# Define all assets
all_assets = [
    *reference_assets.get_assets(),
    *sweep_assets.get_assets(),
    *report_assets.get_assets(),
    *check_assets.get_assets(),
]

# Define resources
resources = {
    "duckdb": DuckDBResource(database_path="data/warehouse/results.duckdb"),
    "reference_cache": ReferenceCacheResource(cache_dir="data/references"),
}

defs = Definitions(
    assets=all_assets,
    resources=resources,
    jobs=[reference_job, sweep_job, check_job],
)
