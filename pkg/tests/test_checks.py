import math

import pytest

from stokes_control import checks
from stokes_control.checks import (
    CHECK_COLUMNS,
    _at_least,
    _at_most,
    _Levels,
    _within,
    check_forward_example,
    check_gradient_force,
    run_checks,
)
from stokes_control.problems import Example, exact_control


@pytest.fixture(scope="module")
def results():
    messages = []
    frame = run_checks(
        levels=[4, 8],
        nu_values=[1.0],
        alpha_values=[0.1],
        samples=3,
        invariance_level=4,
        log=messages.append,
    )
    return frame.set_index("name"), messages


def test_suite_shape(results):
    frame, messages = results
    assert list(frame.reset_index().columns) == CHECK_COLUMNS
    assert frame.index.is_unique
    assert len(messages) == 7
    assert all("passed" in message for message in messages)


@pytest.mark.parametrize(
    "name",
    [
        "gradient_force.robust_velocity",
        "eps_invariance.FullRobust",
        "eps_invariance.ScottVogelius",
        "eps_invariance.Classical_differs",
        "projector.orthogonality",
        "reconstruction.divergence",
        "dual_norm.scott_vogelius",
        "dual_norm.bounded_by_projection",
        "objective.full_robust",
    ],
)
def test_structural_properties_hold_on_small_meshes(results, name):
    frame, _ = results
    assert bool(frame.loc[name, "passed"]), frame.loc[name, "detail"]


def test_partial_robust_is_reported_only(results):
    frame, _ = results
    row = frame.loc["eps_invariance.PartialRobust"]
    assert bool(row["passed"]) and math.isnan(row["threshold"])


def test_gradient_force_rates():
    rows = check_gradient_force([4, 8], _Levels(degree=8, data_degree=12, threads=1))
    assert [row.name for row in rows] == [
        "gradient_force.robust_velocity",
        "gradient_force.classical_velocity",
        "gradient_force.classical_eoc",
    ]
    assert rows[0].value <= 1e-8


def test_threshold_helpers():
    assert _at_most("a", 1e-12, 1e-10).passed
    assert not _at_most("a", 1e-9, 1e-10).passed
    assert _at_least("b", 2.0, 1.0).passed
    assert not _at_least("b", float("nan"), 1.0).passed

    close = _within("c", 1.9, 2.0, 0.3, "n=8")
    assert close.passed and close.detail == "target 2; n=8"
    assert not _within("c", float("nan"), 2.0, 0.3).passed
    assert _within("c", 2.0, 2.0, 0.3).detail == "target 2"


def test_forward_example_is_driven_by_the_exact_control(monkeypatch):
    calls = []

    def recording(data):
        calls.append(data)
        return exact_control(data)

    monkeypatch.setattr(checks, "exact_control", recording)
    rows = check_forward_example([4, 8], _Levels(degree=8, data_degree=12, threads=1), nu=0.5)
    assert [row.name for row in rows] == ["forward_example.h1_eoc"]
    assert math.isfinite(rows[0].value)
    assert [(data.example, data.nu) for data in calls] == [(Example.EX1, 0.5)]
