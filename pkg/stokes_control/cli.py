"""Command-line front end: ``stokes-control run | reference | check``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from dagster import materialize

from stokes_control.assets.check_assets import invariant_checks
from stokes_control.assets.reference_assets import reference_solutions
from stokes_control.assets.report_assets import convergence_tables
from stokes_control.assets.sweep_assets import CSV_NAME, error_reports
from stokes_control.config import RunConfig, config_to_dict, describe_defaults, parse_config, validate_run_config
from stokes_control.errors import ConfigError, ReferenceCacheError, SolverError, StokesControlError
from stokes_control.resources import DuckDBResource, ReferenceCacheResource

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stokes-control",
        description="Pressure-robust Stokes optimal control sweeps, references and checks.",
        epilog="configuration defaults (key = value):\n" + describe_defaults(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "run the convergence sweep and write CSV and markdown tables"),
        ("reference", "generate missing reference solutions"),
        ("check", "run the invariant suite; exit 1 if any check fails"),
    ):
        command = sub.add_parser(name, help=text, description=text)
        command.add_argument("--config", type=Path, help="key = value configuration file")
        command.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        command.add_argument("--cache", type=Path, help="reference cache directory (overrides cache_dir)")
        command.add_argument("--threads", type=int, help="assembly threads (overrides threads)")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from exc
        values = config_to_dict(parse_config(text))
    else:
        values = config_to_dict(RunConfig())
    if args.out is not None:
        values["output_dir"] = str(args.out)
    if args.cache is not None:
        values["cache_dir"] = str(args.cache)
    if args.threads is not None:
        values["threads"] = args.threads
    return validate_run_config(RunConfig(**values))


def _resources(config: RunConfig) -> dict:
    return {
        "duckdb": DuckDBResource(database_path=str(Path(config.output_dir) / "results.duckdb")),
        "reference_cache": ReferenceCacheResource(
            cache_dir=config.cache_dir, allow_generate=config.generate_references
        ),
    }


def _run_config(config: RunConfig, assets) -> dict:
    values = config_to_dict(config)
    return {"ops": {asset.key.path[-1]: {"config": values} for asset in assets}}


def user_error(exc: BaseException) -> BaseException:
    """The library exception behind a Dagster step failure, if any."""
    seen = set()
    while id(exc) not in seen:
        seen.add(id(exc))
        if isinstance(exc, StokesControlError):
            return exc
        inner = getattr(exc, "user_exception", None) or exc.__cause__
        if inner is None:
            return exc
        exc = inner
    return exc


def _materialize(config: RunConfig, assets):
    return materialize(assets, resources=_resources(config), run_config=_run_config(config, assets))


def run_command(command: str, config: RunConfig) -> int:
    if command == "run":
        assets = [reference_solutions, error_reports, convergence_tables]
        result = _materialize(config, assets)
        frame = result.output_for_node("error_reports")
        print(f"{len(frame)} rows -> {Path(config.output_dir) / CSV_NAME}")
        print(f"tables -> {Path(config.output_dir) / 'tables'}")
        return EXIT_OK
    if command == "reference":
        result = _materialize(config, [reference_solutions])
        manifest = result.output_for_node("reference_solutions")
        for row in manifest.to_dict("records"):
            print(f"ex{row['example']} nu={row['nu']:g} alpha={row['alpha']:g} n={row['level']}: {row['path']}")
        return EXIT_OK

    result = _materialize(config, [invariant_checks])
    checks = result.output_for_node("invariant_checks")
    for row in checks.to_dict("records"):
        status = "PASS" if row["passed"] else "FAIL"
        print(f"{status}  {row['name']:<40} {row['value']:.3e}  (threshold {row['threshold']:.1e}) {row['detail']}")
    return EXIT_OK if bool(checks["passed"].all()) else EXIT_CHECKS_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
        return run_command(args.command, config)
    except Exception as exc:  # noqa: BLE001
        error = user_error(exc)
        if isinstance(error, ConfigError):
            print(f"configuration error: {error}", file=sys.stderr)
            return EXIT_CONFIG
        if isinstance(error, (SolverError, ReferenceCacheError)):
            print(f"solver error: {error}", file=sys.stderr)
            return EXIT_SOLVER
        raise


if __name__ == "__main__":
    sys.exit(main())
