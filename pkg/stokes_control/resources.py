"""DuckDB results warehouse and reference-solution cache resources."""

import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Callable

import duckdb
import pandas as pd
from dagster import ConfigurableResource, get_dagster_logger

from stokes_control.analysis import ReferenceSolution
from stokes_control.errors import ReferenceCacheError
from stokes_control.references import read_reference, reference_key, write_reference

# Cross-platform file locking
if sys.platform == "win32":
    import msvcrt
else:
    import fcntl

logger = get_dagster_logger(__name__)


def _lock_file(file_handle):
    if sys.platform == "win32":
        msvcrt.locking(file_handle.fileno(), msvcrt.LK_LOCK, 1)
    else:
        fcntl.flock(file_handle.fileno(), fcntl.LOCK_EX)


def _unlock_file(file_handle):
    if sys.platform == "win32":
        msvcrt.locking(file_handle.fileno(), msvcrt.LK_UNLCK, 1)
    else:
        fcntl.flock(file_handle.fileno(), fcntl.LOCK_UN)


@contextmanager
def file_lock(lock_path: Path):
    """Exclusive lock across processes (Dagster's multiprocess executor)."""
    lock_path.parent.mkdir(parents=True, exist_ok=True)
    lock_file = open(lock_path, "w")
    try:
        _lock_file(lock_file)
        yield
    finally:
        _unlock_file(lock_file)
        lock_file.close()


class DuckDBResource(ConfigurableResource):
    """Results warehouse; every connection is serialized through a lock file."""

    database_path: str = "data/warehouse/results.duckdb"

    @contextmanager
    def get_connection(self):
        db_path = Path(self.database_path)
        with file_lock(Path(str(db_path) + ".lock")):
            conn = duckdb.connect(str(db_path), read_only=False)
            try:
                yield conn
            finally:
                conn.close()

    def execute_query(self, query: str):
        with self.get_connection() as conn:
            return conn.execute(query).fetchall()

    def read_csv_to_table(self, csv_path: str, table_name: str) -> int:
        """Replace ``table_name`` with the contents of a CSV file; returns the row count."""
        with self.get_connection() as conn:
            conn.execute(
                f"CREATE OR REPLACE TABLE {table_name} AS SELECT * FROM read_csv_auto('{csv_path}', header=true)"
            )
            conn.commit()
            return conn.execute(f"SELECT COUNT(*) FROM {table_name}").fetchone()[0]

    def write_dataframe(self, frame: pd.DataFrame, table_name: str) -> int:
        with self.get_connection() as conn:
            conn.register("incoming", frame)
            conn.execute(f"CREATE OR REPLACE TABLE {table_name} AS SELECT * FROM incoming")
            conn.unregister("incoming")
            conn.commit()
            return len(frame)


class ReferenceCacheResource(ConfigurableResource):
    """Directory of fine-grid Scott-Vogelius references, one subdirectory per key.

    Writes go to a temporary directory that is renamed into place under a
    lock, so readers never see a partial reference.
    """

    cache_dir: str = "data/references"
    allow_generate: bool = True

    def path_for(self, example: int, nu: float, alpha: float, level: int) -> Path:
        return Path(self.cache_dir) / reference_key(example, nu, alpha, level)

    def _lock_path(self) -> Path:
        return Path(self.cache_dir) / ".cache.lock"

    def exists(self, example: int, nu: float, alpha: float, level: int) -> bool:
        return (self.path_for(example, nu, alpha, level) / "manifest.txt").is_file()

    def load(
        self, example: int, nu: float, alpha: float, level: int, degree: int = 8, data_degree: int = 12
    ) -> ReferenceSolution:
        path = self.path_for(example, nu, alpha, level)
        if not (path / "manifest.txt").is_file():
            raise ReferenceCacheError(
                f"no cached reference for example={example} nu={nu} alpha={alpha} level={level} "
                f"in {self.cache_dir}; run 'stokes-control reference' or enable generate_references"
            )
        return read_reference(path, degree=degree, data_degree=data_degree)

    def store(self, reference: ReferenceSolution) -> Path:
        target = self.path_for(int(reference.example), reference.nu, reference.alpha, reference.level)
        target.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=target.parent))
        try:
            write_reference(reference, staging)
            with file_lock(self._lock_path()):
                if target.exists():
                    shutil.rmtree(target)
                os.replace(staging, target)
        finally:
            if staging.exists():
                shutil.rmtree(staging, ignore_errors=True)
        logger.info(f"stored reference {target.name}")
        return target

    def ensure(
        self,
        example: int,
        nu: float,
        alpha: float,
        level: int,
        generate: Callable[[], ReferenceSolution],
        degree: int = 8,
        data_degree: int = 12,
    ) -> ReferenceSolution:
        """Load a cached reference, generating and storing it first if allowed."""
        if self.exists(example, nu, alpha, level):
            return self.load(example, nu, alpha, level, degree, data_degree)
        if not self.allow_generate:
            return self.load(example, nu, alpha, level, degree, data_degree)
        reference = generate()
        self.store(reference)
        return reference
