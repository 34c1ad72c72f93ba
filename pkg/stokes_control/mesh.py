"""Conforming triangulations of the unit square with region tags."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from dagster import get_dagster_logger
from scipy.spatial import cKDTree

from stokes_control.errors import MeshError

logger = get_dagster_logger(__name__)

# local edge k is opposite local vertex k
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])

CONTROL_BOUNDARY = 2.0 / 5.0
OBSERVATION_BOUNDARY = 3.0 / 5.0


class RegionTag(IntEnum):
    """Subdomain selector. Triangles carry C, F or O; WHOLE selects all."""

    WHOLE = 0
    C = 1
    F = 2
    O = 3  # noqa: E741


def tag_regions(centroids: np.ndarray) -> np.ndarray:
    """Assign C/F/O by the x-coordinate of each centroid."""
    x = centroids[:, 0]
    tags = np.full(len(x), RegionTag.F, dtype=np.int8)
    tags[x < CONTROL_BOUNDARY] = RegionTag.C
    tags[x > OBSERVATION_BOUNDARY] = RegionTag.O
    return tags


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Triangle mesh with edge topology.

    Edges are stored as vertex pairs sorted ascending by global index. The
    global normal of an edge (a, b) points to the right of the direction
    a -> b; ``tri_edge_signs[t, k]`` is +1 when that normal is outward for
    triangle ``t`` and -1 otherwise.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    tri_edge_signs: np.ndarray
    boundary_edges: np.ndarray
    edge_triangles: np.ndarray
    regions: np.ndarray
    barycentric: bool = False
    cells_per_side: Optional[int] = None
    aligned_regions: bool = field(default=False)

    @classmethod
    def from_arrays(
        cls,
        vertices: np.ndarray,
        triangles: np.ndarray,
        regions: Optional[np.ndarray] = None,
        barycentric: bool = False,
        cells_per_side: Optional[int] = None,
        aligned_regions: bool = False,
    ) -> "Triangulation":
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError(f"vertices must have shape (nv, 2), got {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
            raise MeshError(f"triangles must have shape (nt, 3), got {triangles.shape}")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshError("triangle references a vertex index out of range")

        nt = len(triangles)
        pairs = np.sort(triangles[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
        edges, inverse, counts = np.unique(
            pairs, axis=0, return_inverse=True, return_counts=True
        )
        inverse = np.asarray(inverse).reshape(-1)
        if counts.max() > 2:
            bad = edges[np.argmax(counts)]
            raise MeshError(f"edge {tuple(bad)} is shared by more than two triangles")
        tri_edges = inverse.reshape(nt, 3)

        # first owner is the lowest triangle index
        owner = np.repeat(np.arange(nt), 3)
        order = np.lexsort((owner, inverse))
        sorted_edges = inverse[order]
        sorted_owner = owner[order]
        starts = np.searchsorted(sorted_edges, np.arange(len(edges)))
        edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_triangles[:, 0] = sorted_owner[starts]
        shared = counts == 2
        edge_triangles[shared, 1] = sorted_owner[starts[shared] + 1]

        a = vertices[edges[tri_edges, 0]]
        b = vertices[edges[tri_edges, 1]]
        tangent = b - a
        normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
        opposite = vertices[triangles]
        outward = np.einsum("tkd,tkd->tk", normal, opposite - a) < 0.0
        tri_edge_signs = np.where(outward, 1, -1).astype(np.int8)

        if regions is None:
            regions = tag_regions(vertices[triangles].mean(axis=1))
        regions = np.asarray(regions, dtype=np.int8)
        if regions.shape != (nt,):
            raise MeshError(f"expected {nt} region tags, got {regions.shape}")

        mesh = cls(
            vertices=vertices,
            triangles=triangles,
            edges=edges,
            tri_edges=tri_edges,
            tri_edge_signs=tri_edge_signs,
            boundary_edges=counts == 1,
            edge_triangles=edge_triangles,
            regions=regions,
            barycentric=barycentric,
            cells_per_side=cells_per_side,
            aligned_regions=aligned_regions,
        )
        mesh.validate()
        return mesh

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1])

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def grad_lambda(self) -> np.ndarray:
        """Gradients of the barycentric coordinates, shape (nt, 3, 2)."""
        p = self.vertices[self.triangles]
        x, y = p[..., 0], p[..., 1]
        i = [1, 2, 0]
        j = [2, 0, 1]
        twice_area = 2.0 * self.signed_areas[:, None]
        return np.stack([(y[:, i] - y[:, j]) / twice_area, (x[:, j] - x[:, i]) / twice_area], axis=-1)

    @cached_property
    def outward_normals(self) -> np.ndarray:
        """Unit outward normal of each local edge, shape (nt, 3, 2)."""
        g = self.grad_lambda
        return -g / np.linalg.norm(g, axis=-1, keepdims=True)

    @cached_property
    def local_edge_lengths(self) -> np.ndarray:
        return 2.0 * self.signed_areas[:, None] * np.linalg.norm(self.grad_lambda, axis=-1)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Global unit edge normals (right of the ascending direction)."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        n = np.stack([d[:, 1], -d[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def local_edge_flip(self) -> np.ndarray:
        """+1 where local edge k runs (k+1 -> k+2) in ascending global order."""
        t = self.triangles
        return np.where(t[:, [1, 2, 0]] < t[:, [2, 0, 1]], 1.0, -1.0)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.edges[self.boundary_edges])

    @property
    def h(self) -> float:
        return float(self.edge_lengths.max())

    def region_mask(self, region: RegionTag) -> np.ndarray:
        if RegionTag(region) is RegionTag.WHOLE:
            return np.ones(self.n_triangles, dtype=bool)
        return self.regions == int(region)

    def validate(self) -> None:
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.argmax(self.signed_areas <= 0.0))
            raise MeshError(f"triangle {bad} is not counterclockwise (area {self.signed_areas[bad]:.3e})")
        euler = self.n_vertices - self.n_edges + self.n_triangles
        if euler != 1:
            raise MeshError(f"Euler characteristic {euler} != 1; mesh is not a simply connected domain")
        interior = ~self.boundary_edges
        t0, t1 = self.edge_triangles[interior, 0], self.edge_triangles[interior, 1]
        s0 = self._edge_sign(t0, np.flatnonzero(interior))
        s1 = self._edge_sign(t1, np.flatnonzero(interior))
        if np.any(s0 == s1):
            raise MeshError("interior edge with equal incidence signs on both sides")

    def _edge_sign(self, tris: np.ndarray, edges: np.ndarray) -> np.ndarray:
        local = np.argmax(self.tri_edges[tris] == edges[:, None], axis=1)
        return self.tri_edge_signs[tris, local]

    @cached_property
    def _centroid_tree(self) -> Tuple[cKDTree, float]:
        reach = np.linalg.norm(self.vertices[self.triangles] - self.centroids[:, None, :], axis=-1).max()
        return cKDTree(self.centroids), float(reach) * (1.0 + 1e-9) + 1e-14

    def barycentric_coordinates(self, tris: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Barycentric coordinates of ``points[i]`` in triangle ``tris[i]``."""
        offset = points - self.centroids[tris]
        return 1.0 / 3.0 + np.einsum("nkd,nd->nk", self.grad_lambda[tris], offset)


def build_unit_square(n: int, require_aligned_regions: bool = False) -> Triangulation:
    """Structured mesh of (0,1)^2 with every cell split along its rising diagonal."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise MeshError(f"cells per side must be a positive integer, got {n!r}")
    n = int(n)
    if require_aligned_regions and n % 5:
        raise MeshError(
            f"n={n} is not a multiple of 5; region boundaries x=2/5 and x=3/5 would cut cells"
        )
    coords = np.arange(n + 1) / n
    x, y = np.meshgrid(coords, coords)
    vertices = np.column_stack([x.ravel(), y.ravel()])

    ii, jj = np.meshgrid(np.arange(n), np.arange(n))
    v0 = (jj * (n + 1) + ii).ravel()
    lower = np.column_stack([v0, v0 + 1, v0 + n + 2])
    upper = np.column_stack([v0, v0 + n + 2, v0 + n + 1])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    mesh = Triangulation.from_arrays(
        vertices,
        triangles,
        cells_per_side=n,
        aligned_regions=n % 5 == 0,
    )
    logger.debug(f"unit square n={n}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
    return mesh


def refine_uniform(mesh: Triangulation) -> Triangulation:
    """Red refinement: four congruent children per triangle via edge midpoints."""
    nv = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])
    a, b, c = mesh.triangles.T
    m0, m1, m2 = (nv + mesh.tri_edges).T
    children = np.stack(
        [
            np.column_stack([a, m2, m1]),
            np.column_stack([m2, b, m0]),
            np.column_stack([m1, m0, c]),
            np.column_stack([m0, m1, m2]),
        ],
        axis=1,
    ).reshape(-1, 3)
    n = None if mesh.cells_per_side is None else 2 * mesh.cells_per_side
    return Triangulation.from_arrays(
        vertices,
        children,
        regions=np.repeat(mesh.regions, 4),
        cells_per_side=n,
        aligned_regions=mesh.aligned_regions,
    )


def refine_barycentric(mesh: Triangulation) -> Triangulation:
    """Split every triangle into three by joining its barycenter to the vertices."""
    nv = mesh.n_vertices
    vertices = np.vstack([mesh.vertices, mesh.centroids])
    a, b, c = mesh.triangles.T
    center = nv + np.arange(mesh.n_triangles)
    children = np.stack(
        [
            np.column_stack([a, b, center]),
            np.column_stack([b, c, center]),
            np.column_stack([c, a, center]),
        ],
        axis=1,
    ).reshape(-1, 3)
    return Triangulation.from_arrays(
        vertices,
        children,
        regions=np.repeat(mesh.regions, 3),
        barycentric=True,
        cells_per_side=mesh.cells_per_side,
        aligned_regions=mesh.aligned_regions,
    )


def locate_points(mesh: Triangulation, points: np.ndarray, tol: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    """Containing triangle and barycentric coordinates for each point.

    Points on shared edges or vertices go to the lowest triangle index.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    outside = np.any((points < -tol) | (points > 1.0 + tol), axis=1)
    if np.any(outside):
        bad = points[np.argmax(outside)]
        raise MeshError(f"point ({bad[0]:.17g}, {bad[1]:.17g}) lies outside the unit square")

    tree, reach = mesh._centroid_tree
    candidates = tree.query_ball_point(points, r=reach)
    counts = np.fromiter((len(c) for c in candidates), dtype=np.int64, count=len(points))
    point_index = np.repeat(np.arange(len(points)), counts)
    tri_index = np.fromiter(
        (t for c in candidates for t in c), dtype=np.int64, count=int(counts.sum())
    )
    lam = mesh.barycentric_coordinates(tri_index, points[point_index])
    inside = np.all(lam >= -tol, axis=1)

    best = np.full(len(points), mesh.n_triangles, dtype=np.int64)
    np.minimum.at(best, point_index[inside], tri_index[inside])
    missing = best == mesh.n_triangles
    if np.any(missing):
        bad = points[np.argmax(missing)]
        raise MeshError(f"no triangle contains point ({bad[0]:.17g}, {bad[1]:.17g})")

    bary = np.clip(mesh.barycentric_coordinates(best, points), 0.0, 1.0)
    bary /= bary.sum(axis=1, keepdims=True)
    return best, bary


def locate_point(mesh: Triangulation, point) -> Tuple[int, np.ndarray]:
    tris, bary = locate_points(mesh, np.asarray(point, dtype=float)[None, :])
    return int(tris[0]), bary[0]


def write_mesh(mesh: Triangulation, path: Union[str, Path]) -> None:
    """Plain-text dump: ``nv nt ne`` header, vertices, triangles, region tags.

    A trailing ``#`` line records how the mesh was built so a round trip keeps
    the barycentric and region-alignment flags.
    """
    lines = [f"{mesh.n_vertices} {mesh.n_triangles} {mesh.n_edges}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    lines += [str(int(r)) for r in mesh.regions]
    cells = "-" if mesh.cells_per_side is None else mesh.cells_per_side
    lines.append(
        f"# barycentric={int(mesh.barycentric)} cells_per_side={cells} aligned_regions={int(mesh.aligned_regions)}"
    )
    Path(path).write_text("\n".join(lines) + "\n")


def _read_flags(line: str) -> Dict[str, object]:
    if not line.startswith("#"):
        return {}
    values = dict(item.split("=", 1) for item in line[1:].split())
    cells = values.get("cells_per_side", "-")
    return {
        "barycentric": values.get("barycentric", "0") == "1",
        "cells_per_side": None if cells == "-" else int(cells),
        "aligned_regions": values.get("aligned_regions", "0") == "1",
    }


def read_mesh(path: Union[str, Path]) -> Triangulation:
    lines = Path(path).read_text().split("\n")
    try:
        nv, nt, ne = (int(v) for v in lines[0].split())
        vertices = np.array([[float(v) for v in line.split()] for line in lines[1 : 1 + nv]])
        triangles = np.array([[int(v) for v in line.split()] for line in lines[1 + nv : 1 + nv + nt]])
        regions = np.array([int(v) for v in lines[1 + nv + nt : 1 + nv + 2 * nt]])
        flags = _read_flags(lines[1 + nv + 2 * nt]) if len(lines) > 1 + nv + 2 * nt else {}
    except (ValueError, IndexError) as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    mesh = Triangulation.from_arrays(vertices, triangles, regions=regions, **flags)
    if mesh.n_edges != ne:
        raise MeshError(f"mesh file {path} declares {ne} edges, topology has {mesh.n_edges}")
    return mesh

