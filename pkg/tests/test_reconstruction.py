import numpy as np
import pytest

from stokes_control.analysis import discrete_divergence_free_samples, eoc, max_divergence, reconstruction_error
from stokes_control.errors import ReconstructionError
from stokes_control.fe_spaces import Family, build_space, interpolate
from stokes_control.mesh import build_unit_square
from stokes_control.reconstruction import apply, build_reconstruction

from tests.conftest import linear_field


def _operator(n):
    mesh = build_unit_square(n)
    return build_reconstruction(build_space(mesh, Family.BR), build_space(mesh, Family.BDM1))


def test_shapes():
    op = _operator(3)
    assert op.local.shape == (op.source.mesh.n_triangles, 6, 9)
    assert op.matrix.shape == (op.target.ndofs, op.source.ndofs)


def test_rejects_wrong_families_and_meshes():
    mesh = build_unit_square(2)
    br, bdm = build_space(mesh, Family.BR), build_space(mesh, Family.BDM1)
    with pytest.raises(ReconstructionError, match="BR_velocity to BDM1"):
        build_reconstruction(bdm, br)
    with pytest.raises(ReconstructionError, match="different meshes"):
        build_reconstruction(br, build_space(build_unit_square(2), Family.BDM1))


def test_zero_maps_to_zero():
    op = _operator(2)
    assert not np.any(apply(op, np.zeros(op.source.ndofs)))


def test_rejects_wrong_length():
    op = _operator(2)
    with pytest.raises(ReconstructionError):
        op.apply(np.zeros(op.source.ndofs + 1))


def test_reproduces_linear_fields():
    op = _operator(3)
    reconstructed = op.apply(interpolate(op.source, linear_field))
    np.testing.assert_allclose(reconstructed, interpolate(op.target, linear_field), atol=1e-12)


def test_owner_and_neighbour_agree_on_shared_edges():
    """Normal moments of a BR function are single valued, so both neighbours give the same BDM1 dofs."""
    op = _operator(3)
    coeffs = np.random.default_rng(1).standard_normal(op.source.ndofs)
    mesh = op.source.mesh
    per_element = np.einsum("tfb,tb->tf", op.local, coeffs[op.source.dofs])
    global_values = op.apply(coeffs)
    np.testing.assert_allclose(per_element, global_values[op.target.dofs], atol=1e-12)
    assert mesh.n_edges == op.target.ndofs // 2


def test_divergence_free_after_reconstruction(br_disc):
    op = br_disc.reconstruction
    for v in discrete_divergence_free_samples(br_disc, count=5, seed=4):
        v = v / np.abs(v).max()
        assert max_divergence(op.target, op.apply(v)) <= 1e-10
        boundary = op.target.boundary_dofs
        np.testing.assert_allclose(op.apply(v)[boundary], 0.0, atol=1e-14)


def test_interpolation_error_decreases():
    def smooth(x, y):
        return np.stack([np.sin(np.pi * x) * np.sin(np.pi * y), np.cos(x) * y], axis=-1)

    errors = []
    for n in (8, 16):
        op = _operator(n)
        errors.append(reconstruction_error(op, interpolate(op.source, smooth)))
    assert eoc(errors)[0] >= 0.9


def test_single_bubble_maps_to_its_edge_mean():
    op = _operator(3)
    mesh = op.source.mesh
    for edge in (np.flatnonzero(~mesh.boundary_edges)[0], np.flatnonzero(mesh.boundary_edges)[0]):
        v = np.zeros(op.source.ndofs)
        v[2 * mesh.n_vertices + edge] = 1.0
        expected = np.zeros(op.target.ndofs)
        expected[edge] = 1.0
        np.testing.assert_allclose(op.apply(v), expected, atol=1e-12)
