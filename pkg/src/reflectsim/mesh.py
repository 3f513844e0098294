"""Triangular surface meshes for flat rectangular panels.

All geometry is expressed in millimetres.  Meshes are stored as flat numpy
arrays (one row per facet) so the radiation kernels can consume them without
conversion; a small `Facet` view object is available for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Facet", "SurfaceMesh", "mesh_rectangle"]


@dataclass(frozen=True)
class Facet:
    """Single planar triangle: vertices (3x3), centroid, area and unit normal."""

    vertices: np.ndarray
    centroid: np.ndarray
    area: float
    normal: np.ndarray


class SurfaceMesh:
    """Collection of planar triangular facets.

    Parameters
    ----------
    vertices : (n, 3, 3) float array
        Triangle vertices, one row of three 3-vectors per facet.

    Notes
    -----
    Centroids, areas and unit normals are derived once at construction.
    The winding order of the vertices fixes the normal via the right-hand
    rule; `mesh_rectangle` produces +z normals in the local frame.
    """

    def __init__(self, vertices: np.ndarray) -> None:
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 3 or vertices.shape[1:] != (3, 3):
            raise ValueError(f"expected (n, 3, 3) vertex array, got {vertices.shape}")
        self.vertices = vertices
        self.centroids = vertices.mean(axis=1)
        edge1 = vertices[:, 1] - vertices[:, 0]
        edge2 = vertices[:, 2] - vertices[:, 0]
        cross = np.cross(edge1, edge2)
        norms = np.linalg.norm(cross, axis=1)
        if np.any(norms <= 0.0):
            raise ValueError("degenerate facet (zero area)")
        self.areas = 0.5 * norms
        self.normals = cross / norms[:, None]

    # ------------------------------------------------------------------
    # basic queries
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_facets(self) -> int:
        return self.vertices.shape[0]

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    def facet(self, i: int) -> Facet:
        return Facet(
            vertices=self.vertices[i],
            centroid=self.centroids[i],
            area=float(self.areas[i]),
            normal=self.normals[i],
        )

    def max_edge_length(self) -> float:
        v = self.vertices
        e = np.stack(
            [
                np.linalg.norm(v[:, 1] - v[:, 0], axis=1),
                np.linalg.norm(v[:, 2] - v[:, 1], axis=1),
                np.linalg.norm(v[:, 0] - v[:, 2], axis=1),
            ]
        )
        return float(e.max())

    # ------------------------------------------------------------------
    # transforms
    # ------------------------------------------------------------------

    def transformed(self, rotation: np.ndarray | None = None,
                    translation: np.ndarray | None = None) -> "SurfaceMesh":
        """Return a rigidly transformed copy (rotation applied first)."""
        v = self.vertices
        if rotation is not None:
            rotation = np.asarray(rotation, dtype=float)
            v = v @ rotation.T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return SurfaceMesh(v)

    def subset(self, keep: np.ndarray) -> "SurfaceMesh":
        """Return the mesh restricted to the facets selected by `keep`."""
        return SurfaceMesh(self.vertices[keep])

    @staticmethod
    def concat(meshes: list["SurfaceMesh"]) -> "SurfaceMesh":
        return SurfaceMesh(np.concatenate([m.vertices for m in meshes], axis=0))


def mesh_rectangle(width: float, height: float, max_edge: float) -> SurfaceMesh:
    """Mesh a width x height rectangle with right triangles.

    The rectangle lies in the local z = 0 plane, centred at the origin, with
    sides along x (width) and y (height).  Every facet normal is +z and every
    edge, hypotenuses included, is no longer than `max_edge`.  The cell count
    is the smallest that satisfies the edge bound, so total facet area equals
    the rectangle area exactly (up to float rounding).
    """
    if width <= 0.0 or height <= 0.0:
        raise ValueError("rectangle dimensions must be positive")
    if max_edge <= 0.0:
        raise ValueError("max_edge must be positive")
    # legs h satisfy h*sqrt(2) <= max_edge so the hypotenuse meets the bound
    nx = max(1, int(np.ceil(width * np.sqrt(2.0) / max_edge)))
    ny = max(1, int(np.ceil(height * np.sqrt(2.0) / max_edge)))
    xs = np.linspace(-width / 2.0, width / 2.0, nx + 1)
    ys = np.linspace(-height / 2.0, height / 2.0, ny + 1)

    # vertex grid -> two triangles per cell, consistent winding (+z normals)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    grid = np.stack([gx, gy, np.zeros_like(gx)], axis=-1)  # (nx+1, ny+1, 3)
    v00 = grid[:-1, :-1].reshape(-1, 3)
    v10 = grid[1:, :-1].reshape(-1, 3)
    v01 = grid[:-1, 1:].reshape(-1, 3)
    v11 = grid[1:, 1:].reshape(-1, 3)
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    return SurfaceMesh(np.concatenate([lower, upper], axis=0))
