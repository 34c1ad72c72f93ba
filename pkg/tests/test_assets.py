"""
Tests for the Dagster assets, both invoked directly and materialized together.

Run with: pytest tests/
"""

from pathlib import Path

import pandas as pd
import pytest
from dagster import build_asset_context, materialize

from stokes_control import all_assets, defs
from stokes_control.analysis import CSV_COLUMNS
from stokes_control.assets.check_assets import invariant_checks
from stokes_control.assets.reference_assets import reference_solutions
from stokes_control.assets.report_assets import convergence_tables
from stokes_control.assets.sweep_assets import CSV_NAME, error_reports
from stokes_control.checks import CHECK_COLUMNS
from stokes_control.config import RunConfig, config_to_dict
from stokes_control.errors import ReferenceCacheError
from stokes_control.resources import DuckDBResource, ReferenceCacheResource


def _value(result):
    return getattr(result, "value", result)


def _tiny_config(tmp_path, **overrides):
    values = dict(
        examples=[1],
        schemes=["Classical", "FullRobust"],
        levels=[2, 4],
        nu=[1.0],
        alpha=[0.1],
        eps=[0.0],
        reference_level=8,
        cache_dir=str(tmp_path / "references"),
        output_dir=str(tmp_path / "results"),
    )
    values.update(overrides)
    return RunConfig(**values)


def _resources(config):
    return {
        "duckdb": DuckDBResource(database_path=str(Path(config.output_dir) / "results.duckdb")),
        "reference_cache": ReferenceCacheResource(cache_dir=config.cache_dir),
    }


def test_reference_solutions_asset(tmp_path):
    """Generates the missing reference and reports it in the manifest."""
    config = _tiny_config(tmp_path, reference_level=4, levels=[2])
    cache = ReferenceCacheResource(cache_dir=config.cache_dir)

    manifest = _value(reference_solutions(build_asset_context(), config=config, reference_cache=cache))

    assert len(manifest) == 1
    row = manifest.iloc[0]
    assert (row["example"], row["level"]) == (1, 4)
    assert cache.exists(1, 1.0, 0.1, 4)


def test_reference_solutions_respects_generate_flag(tmp_path):
    config = _tiny_config(tmp_path, reference_level=4, levels=[2], generate_references=False)
    cache = ReferenceCacheResource(cache_dir=config.cache_dir)

    with pytest.raises(ReferenceCacheError):
        reference_solutions(build_asset_context(), config=config, reference_cache=cache)


def test_sweep_materializes(tmp_path):
    """References, error reports and tables materialize together."""
    config = _tiny_config(tmp_path)
    assets = [reference_solutions, error_reports, convergence_tables]
    run_config = {"ops": {a.key.path[-1]: {"config": config_to_dict(config)} for a in assets}}

    result = materialize(assets, resources=_resources(config), run_config=run_config)
    assert result.success

    frame = result.output_for_node("error_reports")
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == 2 * 2

    csv = pd.read_csv(tmp_path / "results" / CSV_NAME)
    assert len(csv) == len(frame)

    duckdb = DuckDBResource(database_path=str(tmp_path / "results" / "results.duckdb"))
    assert duckdb.execute_query("SELECT COUNT(*) FROM error_reports")[0][0] == len(frame)
    described = duckdb.execute_query("DESCRIBE error_reports")
    assert [row[0] for row in described] == CSV_COLUMNS

    tables = result.output_for_node("convergence_tables")
    assert list(tables) == ["ex1_nu1_alpha0.1"]
    assert (tmp_path / "results" / "tables" / "ex1_nu1_alpha0.1.md").is_file()


def test_invariant_checks_asset(tmp_path):
    config = _tiny_config(tmp_path, levels=[4, 8], reference_level=16)
    duckdb = DuckDBResource(database_path=str(tmp_path / "results.duckdb"))

    results = _value(invariant_checks(build_asset_context(), config=config, duckdb=duckdb))

    assert list(results.columns) == CHECK_COLUMNS
    stored = duckdb.execute_query("SELECT COUNT(*) FROM invariant_checks")[0][0]
    assert stored == len(results)


def test_definitions():
    assert {a.key.path[-1] for a in all_assets} == {
        "reference_solutions",
        "error_reports",
        "convergence_tables",
        "invariant_checks",
    }
    for name in ("reference_job", "sweep_job", "check_job"):
        assert defs.get_job_def(name).name == name
