import numpy as np
import pytest

from stokes_control.analysis import pressure_mean
from stokes_control.errors import ReferenceCacheError
from stokes_control.fe_spaces import Family
from stokes_control.kkt_solver import Scheme
from stokes_control.problems import Example
from stokes_control.references import (
    generate_reference,
    parse_manifest,
    read_reference,
    reference_key,
    write_reference,
)

FILES = ["u.txt", "p.txt", "z.txt", "lambda.txt", "manifest.txt"]


@pytest.fixture(scope="module")
def reference():
    return generate_reference(1, nu=1.0, alpha=0.1, level=2)


def test_reference_key():
    assert reference_key(1, 1e-3, 1e-6, 160) == "ex1_nu0.001_alpha1e-06_n160"
    assert reference_key(2, 1, 0.1, 20) == "ex2_nu1.0_alpha0.1_n20"


def test_generated_reference(reference):
    assert reference.scheme is Scheme.SCOTT_VOGELIUS
    assert reference.example is Example.EX1
    assert reference.space.family is Family.P2
    assert reference.discretization.mesh.barycentric
    assert abs(pressure_mean(reference.discretization, reference.p)) <= 1e-12
    assert abs(pressure_mean(reference.discretization, reference.lam)) <= 1e-12
    np.testing.assert_allclose(reference.q_field.coeffs, -(0.1**-0.5) * reference.z)


def test_write_and_read(reference, tmp_path):
    write_reference(reference, tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == sorted(FILES)

    manifest = parse_manifest(tmp_path / "manifest.txt")
    assert manifest["scheme"] == "ScottVogelius"
    assert manifest["level"] == "2"
    assert int(manifest["velocity_dofs"]) == reference.space.ndofs

    loaded = read_reference(tmp_path)
    for name in ("u", "p", "z", "lam"):
        np.testing.assert_array_equal(getattr(loaded, name), getattr(reference, name))
    assert (loaded.nu, loaded.alpha, loaded.level) == (1.0, 0.1, 2)


def test_regeneration_is_byte_identical(reference, tmp_path):
    write_reference(reference, tmp_path / "first")
    write_reference(generate_reference(1, nu=1.0, alpha=0.1, level=2), tmp_path / "second")
    for name in FILES:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_missing_manifest(tmp_path):
    with pytest.raises(ReferenceCacheError, match="manifest"):
        read_reference(tmp_path)


def test_incomplete_manifest(tmp_path):
    (tmp_path / "manifest.txt").write_text("scheme=ScottVogelius example=1\n")
    with pytest.raises(ReferenceCacheError, match="incomplete manifest"):
        read_reference(tmp_path)


def test_corrupt_coefficients(reference, tmp_path):
    write_reference(reference, tmp_path)
    (tmp_path / "z.txt").write_text("P2_velocity 2 3\n1\n2\n3\n")
    with pytest.raises(ReferenceCacheError, match="corrupt reference"):
        read_reference(tmp_path)
