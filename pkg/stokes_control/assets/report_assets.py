"""Markdown convergence tables built from the error reports."""

from pathlib import Path
from typing import Dict

import pandas as pd
from dagster import AssetExecutionContext, MetadataValue, Output, asset

from stokes_control.config import RunConfig
from stokes_control.sweep import markdown_tables, write_markdown


@asset(
    description="One markdown convergence table per (example, nu, alpha)",
    group_name="reports",
)
def convergence_tables(
    context: AssetExecutionContext,
    config: RunConfig,
    error_reports: pd.DataFrame,
) -> Output[Dict[str, str]]:
    tables = markdown_tables(error_reports)
    paths = write_markdown(tables, Path(config.output_dir) / "tables")
    context.log.info(f"Wrote {len(paths)} convergence tables")

    preview = next(iter(tables.values()), "no results")
    return Output(
        tables,
        metadata={
            "tables": len(tables),
            "directory": str(Path(config.output_dir) / "tables"),
            "preview": MetadataValue.md(preview),
        },
    )


def get_assets():
    return [convergence_tables]
