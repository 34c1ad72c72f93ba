import pandas as pd
import pytest

from stokes_control.analysis import CSV_COLUMNS
from stokes_control.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main, user_error
from stokes_control.errors import ConfigError
from stokes_control.resources import DuckDBResource

TINY = """\
examples = 1
schemes = Classical, ScottVogelius
levels = 2, 4
nu = 1.0
alpha = 0.1
eps = 0
reference_level = 8
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(TINY)
    return path


def _args(config_file, tmp_path, command):
    return [
        command,
        "--config",
        str(config_file),
        "--out",
        str(tmp_path / "out"),
        "--cache",
        str(tmp_path / "cache"),
    ]


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "reference_level = 160" in out
    assert "run" in out and "check" in out


def test_run_writes_report(config_file, tmp_path, capsys):
    assert main(_args(config_file, tmp_path, "run")) == EXIT_OK

    frame = pd.read_csv(tmp_path / "out" / "error_report.csv")
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == 2 * 2
    assert set(frame["scheme"]) == {"Classical", "ScottVogelius"}
    assert (tmp_path / "out" / "tables" / "ex1_nu1_alpha0.1.md").is_file()
    assert "4 rows" in capsys.readouterr().out


def test_bad_config_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("nu = 1\nmu = 2\n")
    assert main(["run", "--config", str(path)]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path):
    assert main(["check", "--config", str(tmp_path / "absent.cfg")]) == EXIT_CONFIG


def test_reference_without_generation_exits_3(tmp_path, capsys):
    path = tmp_path / "ref.cfg"
    path.write_text(TINY + "generate_references = false\n")
    assert main(_args(path, tmp_path, "reference")) == EXIT_SOLVER
    assert "no cached reference" in capsys.readouterr().err


def test_reference_then_run_reuses_cache(config_file, tmp_path, capsys):
    assert main(_args(config_file, tmp_path, "reference")) == EXIT_OK
    assert "ex1 nu=1 alpha=0.1 n=8" in capsys.readouterr().out

    offline = tmp_path / "offline.cfg"
    offline.write_text(TINY + "generate_references = false\n")
    assert main(_args(offline, tmp_path, "run")) == EXIT_OK


def test_check_reports_every_row(tmp_path, capsys):
    path = tmp_path / "check.cfg"
    path.write_text("examples = 1\nlevels = 4, 8\nnu = 1.0\nalpha = 0.1\nreference_level = 16\n")

    code = main(_args(path, tmp_path, "check"))
    assert code in (0, 1)

    lines = [line for line in capsys.readouterr().out.splitlines() if line[:4] in ("PASS", "FAIL")]
    duckdb = DuckDBResource(database_path=str(tmp_path / "out" / "results.duckdb"))
    assert duckdb.execute_query("SELECT COUNT(*) FROM invariant_checks")[0][0] == len(lines)
    assert (code == 0) == all(line.startswith("PASS") for line in lines)


def test_user_error_unwraps_causes():
    cause = ConfigError("boom")
    try:
        try:
            raise cause
        except ConfigError as exc:
            raise RuntimeError("step failed") from exc
    except RuntimeError as wrapped:
        assert user_error(wrapped) is cause
    plain = ValueError("other")
    assert user_error(plain) is plain
