"""Jobs for orchestrating asset materializations."""

from dagster import AssetSelection, define_asset_job


# Job that fills the reference cache
reference_job = define_asset_job(
    name="reference_job",
    description="Generate or load the fine-grid Scott-Vogelius references",
    selection=AssetSelection.groups("references"),
)


# Job for the full convergence sweep
sweep_job = define_asset_job(
    name="sweep_job",
    description="References -> error reports -> convergence tables",
    selection=AssetSelection.groups("references", "sweep", "reports"),
)


# Job for the property suite
check_job = define_asset_job(
    name="check_job",
    description="Run the invariant and robustness checks",
    selection=AssetSelection.groups("checks"),
)
