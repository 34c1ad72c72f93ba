"""Tests for dof maps, local bases, interpolation and the coefficient file format."""

import numpy as np
import pytest

from stokes_control.errors import SpaceError
from stokes_control.fe_spaces import (
    Family,
    br_edge_moments,
    build_space,
    edge_moments,
    eval_basis,
    evaluate,
    interpolate,
    physical_points,
    read_coefficients,
    write_coefficients,
)
from stokes_control.mesh import build_unit_square, refine_barycentric
from stokes_control.quadrature import triangle_rule

from tests.conftest import linear_field


def _sample(space, fn, degree=6):
    rule = triangle_rule(degree)
    elements = np.arange(space.mesh.n_triangles)
    points = physical_points(space.mesh, rule.barycentric, elements)
    values, _ = evaluate(space, interpolate(space, fn), rule.barycentric, elements)
    return values, fn(points[..., 0], points[..., 1])


def test_dof_counts():
    mesh = build_unit_square(1)
    assert build_space(mesh, Family.BR).ndofs == 13
    assert build_space(mesh, Family.BDM1).ndofs == 10
    assert build_space(build_unit_square(5), Family.P0).ndofs == 50

    split = refine_barycentric(mesh)
    assert build_space(split, Family.P2).ndofs == 2 * (split.n_vertices + split.n_edges)
    assert build_space(split, "P1disc_pressure").ndofs == 3 * split.n_triangles


def test_scott_vogelius_needs_barycentric_mesh():
    with pytest.raises(SpaceError, match="barycentric"):
        build_space(build_unit_square(2), Family.P2)
    with pytest.raises(SpaceError):
        build_space(build_unit_square(2), Family.P1DISC)


def test_boundary_and_free_dofs():
    mesh = build_unit_square(3)
    space = build_space(mesh, Family.BR)
    n_bv = len(mesh.boundary_vertices)
    assert len(space.boundary_dofs) == 2 * n_bv + mesh.boundary_edges.sum()
    assert len(space.free_dofs) + len(space.boundary_dofs) == space.ndofs
    assert len(build_space(mesh, Family.P0).boundary_dofs) == 0


def test_local_sizes():
    mesh = build_unit_square(2)
    for family in (Family.BR, Family.P0, Family.BDM1):
        space = build_space(mesh, family)
        assert space.dofs.shape == (mesh.n_triangles, family.local_size)
        assert space.signs.shape == space.dofs.shape


@pytest.mark.parametrize("family", [Family.BR, Family.BDM1])
def test_linear_fields_are_reproduced(family):
    space = build_space(build_unit_square(3), family)
    values, exact = _sample(space, linear_field)
    np.testing.assert_allclose(values, exact, atol=1e-12)


def test_br_interpolant_of_linear_field_has_no_bubbles():
    mesh = build_unit_square(3)
    coeffs = interpolate(build_space(mesh, Family.BR), linear_field)
    np.testing.assert_allclose(coeffs[2 * mesh.n_vertices :], 0.0, atol=1e-13)


def test_p2_reproduces_quadratics():
    space = build_space(refine_barycentric(build_unit_square(2)), Family.P2)

    def quadratic(x, y):
        return np.stack([x * x - 2.0 * x * y, 1.0 + y * y + x], axis=-1)

    values, exact = _sample(space, quadratic)
    np.testing.assert_allclose(values, exact, atol=1e-12)


def test_p1disc_reproduces_linear_scalars():
    space = build_space(refine_barycentric(build_unit_square(2)), Family.P1DISC)
    values, exact = _sample(space, lambda x, y: 2.0 - x + 4.0 * y)
    np.testing.assert_allclose(values, exact, atol=1e-12)


def test_p0_interpolant_is_the_element_mean():
    mesh = build_unit_square(2)
    coeffs = interpolate(build_space(mesh, Family.P0), lambda x, y: x)
    np.testing.assert_allclose(coeffs, mesh.centroids[:, 0], atol=1e-14)


def test_basis_divergence_matches_gradient_trace():
    space = build_space(build_unit_square(2), Family.BR)
    basis = eval_basis(space, triangle_rule(4).barycentric)
    np.testing.assert_allclose(basis.div, basis.grads[..., 0, 0] + basis.grads[..., 1, 1])
    assert basis.values.shape[2:] == (9, 2)


def test_bdm_dual_basis_requires_bdm_space():
    with pytest.raises(SpaceError):
        build_space(build_unit_square(1), Family.BR).bdm_coefficients


def test_coefficient_file(tmp_path):
    space = build_space(build_unit_square(2), Family.BR)
    coeffs = np.random.default_rng(3).standard_normal(space.ndofs)
    path = tmp_path / "u.txt"
    write_coefficients(space, coeffs, path, level=2)

    assert path.read_text().splitlines()[0] == f"BR_velocity 2 {space.ndofs}"
    np.testing.assert_array_equal(read_coefficients(space, path), coeffs)


def test_coefficient_file_mismatch(tmp_path):
    mesh = build_unit_square(2)
    space = build_space(mesh, Family.BR)
    path = tmp_path / "p.txt"
    write_coefficients(build_space(mesh, Family.P0), np.zeros(mesh.n_triangles), path, level=2)
    with pytest.raises(SpaceError, match="does not match"):
        read_coefficients(space, path)
    with pytest.raises(SpaceError):
        write_coefficients(space, np.zeros(3), path, level=2)


def test_br_vertex_functions_are_dual_to_vertex_values():
    space = build_space(build_unit_square(2), Family.BR)
    values = eval_basis(space, np.eye(3)).values
    expected = np.zeros((3, 9, 2))
    for c in range(2):
        for m in range(3):
            expected[m, 3 * c + m, c] = 1.0
    np.testing.assert_allclose(values, np.broadcast_to(expected, values.shape), atol=1e-14)


def test_br_bubble_has_unit_mean_flux_on_its_own_edge_only():
    space = build_space(build_unit_square(3), Family.BR)
    bubbles = br_edge_moments(space)[:, :, 6:]
    expected = np.vstack([np.eye(3), np.zeros((3, 3))])
    np.testing.assert_allclose(bubbles, np.broadcast_to(expected, bubbles.shape), atol=1e-12)

    # vanishes identically on the two other edges
    on_edge = np.array([[0.0, 0.3, 0.7], [0.6, 0.0, 0.4], [0.2, 0.8, 0.0]])
    values = eval_basis(space, on_edge).values
    for k in range(3):
        others = [j for j in range(3) if j != k]
        assert not np.any(values[:, others, 6 + k, :])


def test_bdm1_basis_is_dual_to_edge_moments():
    mesh = build_unit_square(3)
    space = build_space(mesh, Family.BDM1)
    moments = edge_moments(mesh, lambda lam: eval_basis(space, lam).values)
    expected = np.eye(6)[None, :, :] * space.signs[:, None, :]
    np.testing.assert_allclose(moments, expected, atol=1e-12)


def _edge_traces(space, coeffs, side, tau=(0.15, 0.5, 0.85)):
    """Values along every interior edge seen from one neighbour, ordered by the global edge direction."""
    mesh = space.mesh
    interior = np.flatnonzero(~mesh.boundary_edges)
    elements = mesh.edge_triangles[interior, side]
    corners = mesh.triangles[elements]
    first = np.argmax(corners == mesh.edges[interior, 0][:, None], axis=1)
    second = np.argmax(corners == mesh.edges[interior, 1][:, None], axis=1)
    tau = np.asarray(tau)
    bary = np.zeros((len(interior), len(tau), 3))
    rows = np.arange(len(interior))
    bary[rows, :, first] = 1.0 - tau
    bary[rows, :, second] = tau
    values, _ = evaluate(space, coeffs, bary, elements)
    return values, mesh.edge_normals[interior]


def test_br_functions_are_continuous():
    space = build_space(build_unit_square(3), Family.BR)
    coeffs = np.random.default_rng(7).standard_normal(space.ndofs)
    left, _ = _edge_traces(space, coeffs, 0)
    right, _ = _edge_traces(space, coeffs, 1)
    np.testing.assert_allclose(left, right, atol=1e-12)


def test_bdm1_normal_component_is_continuous():
    space = build_space(build_unit_square(3), Family.BDM1)
    coeffs = np.random.default_rng(8).standard_normal(space.ndofs)
    left, normals = _edge_traces(space, coeffs, 0)
    right, _ = _edge_traces(space, coeffs, 1)
    np.testing.assert_allclose(
        np.einsum("eqc,ec->eq", left, normals), np.einsum("eqc,ec->eq", right, normals), atol=1e-12
    )
    assert np.abs(left - right).max() > 1e-6
