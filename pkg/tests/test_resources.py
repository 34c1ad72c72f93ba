"""Tests for the DuckDB warehouse and the reference cache resources."""

import pandas as pd
import pytest

from stokes_control.errors import ReferenceCacheError
from stokes_control.references import generate_reference
from stokes_control.resources import DuckDBResource, ReferenceCacheResource, file_lock


@pytest.fixture(scope="module")
def reference():
    return generate_reference(1, nu=1.0, alpha=0.1, level=2)


def test_duckdb_resource(tmp_path):
    duckdb = DuckDBResource(database_path=str(tmp_path / "results.duckdb"))

    with duckdb.get_connection() as conn:
        result = conn.execute("SELECT 1 + 1 as sum").fetchone()
        assert result[0] == 2

    frame = pd.DataFrame({"scheme": ["Classical", "FullRobust"], "err_energy": [0.5, 0.1]})
    assert duckdb.write_dataframe(frame, "error_reports") == 2
    assert duckdb.execute_query("SELECT COUNT(*) FROM error_reports")[0][0] == 2
    assert (tmp_path / "results.duckdb.lock").exists()


def test_read_csv_to_table(tmp_path):
    csv_path = tmp_path / "report.csv"
    pd.DataFrame({"n": [10, 20, 40], "err": [1.0, 0.5, 0.25]}).to_csv(csv_path, index=False)
    duckdb = DuckDBResource(database_path=str(tmp_path / "results.duckdb"))
    assert duckdb.read_csv_to_table(str(csv_path), "report") == 3
    assert duckdb.execute_query("SELECT MAX(n) FROM report")[0][0] == 40


def test_file_lock_creates_parent(tmp_path):
    lock = tmp_path / "nested" / "cache.lock"
    with file_lock(lock):
        assert lock.exists()


def test_missing_reference(tmp_path):
    cache = ReferenceCacheResource(cache_dir=str(tmp_path))
    assert not cache.exists(1, 1.0, 0.1, 2)
    with pytest.raises(ReferenceCacheError, match="no cached reference"):
        cache.load(1, 1.0, 0.1, 2)


def test_ensure_without_generation(tmp_path):
    cache = ReferenceCacheResource(cache_dir=str(tmp_path), allow_generate=False)

    def generate():
        raise AssertionError("generation is disabled")

    with pytest.raises(ReferenceCacheError, match="generate_references"):
        cache.ensure(1, 1.0, 0.1, 2, generate)


def test_ensure_generates_once(tmp_path, reference):
    cache = ReferenceCacheResource(cache_dir=str(tmp_path))
    calls = []

    def generate():
        calls.append(1)
        return reference

    first = cache.ensure(1, 1.0, 0.1, 2, generate)
    second = cache.ensure(1, 1.0, 0.1, 2, generate)
    assert len(calls) == 1
    assert first is reference
    assert (second.u == reference.u).all()
    assert cache.path_for(1, 1.0, 0.1, 2).name == "ex1_nu1.0_alpha0.1_n2"


def test_store_replaces_atomically(tmp_path, reference):
    cache = ReferenceCacheResource(cache_dir=str(tmp_path))
    target = cache.store(reference)
    cache.store(reference)
    assert target.is_dir()
    leftovers = [p.name for p in tmp_path.iterdir() if p.name.startswith(".staging-")]
    assert leftovers == []
