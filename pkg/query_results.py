"""
Query the results warehouse after a sweep or a check run.

Run this after `stokes-control run` / `stokes-control check` (or after
materializing the assets in the Dagster UI) to see the results.
"""

import sys
from pathlib import Path

import duckdb


def main(db_path: str = "data/results/results.duckdb"):
    path = Path(db_path)

    if not path.exists():
        print("Database not found!")
        print("Run a sweep or the checks first:")
        print("\n1. stokes-control run --config sweep.cfg")
        print("2. stokes-control check")
        print("   or: dagster dev, then materialize the 'sweep' and 'checks' groups")
        return

    conn = duckdb.connect(str(path), read_only=True)

    print("Available Tables:")
    print("=" * 60)
    for (table,) in conn.execute("SHOW TABLES").fetchall():
        count = conn.execute(f"SELECT COUNT(*) FROM {table}").fetchone()[0]
        print(f"  {table:30s} ({count} rows)")

    print("\n" + "=" * 60)
    print("\nFinest-level energy error per scheme (eps = 0):")
    print("=" * 60)
    try:
        rows = conn.execute("""
            SELECT example, scheme, nu, alpha, n, err_energy, eoc_energy
            FROM error_reports
            WHERE eps = 0 AND n = (SELECT MAX(n) FROM error_reports)
            ORDER BY example, nu DESC, alpha DESC, scheme
        """).fetchall()
        for example, scheme, nu, alpha, n, err, rate in rows:
            print(f"  ex{example} {scheme:14s} nu={nu:<8g} alpha={alpha:<8g} n={n:<4d} {err:.3e}  eoc {rate:.2f}")
    except duckdb.Error:
        print("  error_reports not yet materialized. Run the sweep first!")

    print("\n" + "=" * 60)
    print("\nSensitivity to the gradient perturbation (max relative change over eps):")
    print("=" * 60)
    try:
        rows = conn.execute("""
            SELECT scheme, MAX(ABS(hi.err_energy - lo.err_energy) / NULLIF(lo.err_energy, 0)) AS change
            FROM error_reports lo
            JOIN error_reports hi USING (example, scheme, n, nu, alpha)
            WHERE lo.eps = 0 AND hi.eps > 0
            GROUP BY scheme
            ORDER BY change DESC
        """).fetchall()
        for scheme, change in rows:
            print(f"  {scheme:14s} {change:.3e}")
    except duckdb.Error:
        print("  error_reports not yet materialized. Run the sweep first!")

    print("\n" + "=" * 60)
    print("\nInvariant checks:")
    print("=" * 60)
    try:
        rows = conn.execute("SELECT name, passed, value, threshold FROM invariant_checks ORDER BY name").fetchall()
        for name, passed, value, threshold in rows:
            print(f"  {'PASS' if passed else 'FAIL'}  {name:40s} {value:.3e} (threshold {threshold:.1e})")
    except duckdb.Error:
        print("  invariant_checks not yet materialized. Run the checks first!")

    conn.close()
    print("\nDone!\n")


if __name__ == "__main__":
    main(*sys.argv[1:])
