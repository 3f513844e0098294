"""FFT-accelerated radiation between parallel congruent triangulated panels.

The bounce cascade inside a slab exchanges fields between its front face and
the plate region underneath it, both of which `mesh_rectangle` tiles with
uniform right triangles whose centroids form two interleaved rectangular
lattices.  For a pair of such panels with equal lattice spacing the facet-to-
facet sums of the radiation integral are two-dimensional discrete
convolutions, so they can be evaluated with FFTs in O(N log N) instead of
O(N^2) pairs.  The result is bit-comparable with the direct kernel path (the
same discrete sum, reordered), which the test suite asserts.

Only geometry produced by `mesh_rectangle` (optionally rigidly shifted or
flipped in z) is recognised; `PlanarGrid.from_mesh` returns None for anything
else and callers fall back to the direct kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import SurfaceMesh

__all__ = ["PlanarGrid", "PlanarPropagator"]

_COORD_TOL = 1e-6  # mm; lattice coordinates must reproduce to this
_MIN_SEPARATION_MM = 1e-3  # planes closer than this use the direct kernel


@dataclass(frozen=True)
class _Sublattice:
    """One of the two interleaved centroid lattices of a meshed rectangle."""

    origin_x: float
    origin_y: float
    nx: int
    ny: int
    facet_ids: np.ndarray  # facet row numbers in mesh order
    flat: np.ndarray  # grid position ix*ny + iy per facet


@dataclass(frozen=True)
class PlanarGrid:
    """Regular-lattice view of a flat triangulated rectangle."""

    mesh: SurfaceMesh
    z: float
    dx: float
    dy: float
    area: float
    blocks: tuple[_Sublattice, _Sublattice]

    @staticmethod
    def from_mesh(mesh: SurfaceMesh) -> "PlanarGrid | None":
        """Recognise a `mesh_rectangle` product; None when not applicable."""
        n = len(mesh)
        if n < 2 or n % 2 != 0:
            return None
        z = mesh.centroids[:, 2]
        if np.ptp(z) > _COORD_TOL:
            return None
        areas = mesh.areas
        if np.ptp(areas) > 1e-9 * areas[0]:
            return None
        half = n // 2
        blocks = []
        for ids in (np.arange(half), np.arange(half, n)):
            blk = _infer_sublattice(mesh.centroids[ids], ids)
            if blk is None:
                return None
            blocks.append(blk)
        a, b = blocks
        if (a.nx, a.ny) != (b.nx, b.ny):
            return None
        dx, dy = _shared_spacing(a, b, mesh.centroids)
        if dx is None:
            return None
        return PlanarGrid(
            mesh=mesh,
            z=float(z[0]),
            dx=dx,
            dy=dy,
            area=float(areas[0]),
            blocks=(a, b),
        )


def _infer_sublattice(c: np.ndarray, ids: np.ndarray) -> _Sublattice | None:
    x = c[:, 0]
    y = c[:, 1]
    ux = np.unique(np.round(x, 9))
    uy = np.unique(np.round(y, 9))
    nx, ny = len(ux), len(uy)
    if nx * ny != len(ids):
        return None
    for u in (ux, uy):
        if len(u) > 1:
            steps = np.diff(u)
            if np.ptp(steps) > _COORD_TOL:
                return None
    sx = float(ux[1] - ux[0]) if nx > 1 else 0.0
    sy = float(uy[1] - uy[0]) if ny > 1 else 0.0
    ix = np.rint((x - ux[0]) / sx).astype(np.intp) if nx > 1 else np.zeros(len(ids), np.intp)
    iy = np.rint((y - uy[0]) / sy).astype(np.intp) if ny > 1 else np.zeros(len(ids), np.intp)
    rx = ux[0] + ix * sx if nx > 1 else np.full(len(ids), ux[0])
    ry = uy[0] + iy * sy if ny > 1 else np.full(len(ids), uy[0])
    if np.max(np.abs(rx - x)) > _COORD_TOL or np.max(np.abs(ry - y)) > _COORD_TOL:
        return None
    flat = ix * ny + iy
    if np.bincount(flat, minlength=nx * ny).max() != 1:
        return None
    return _Sublattice(
        origin_x=float(ux[0]),
        origin_y=float(uy[0]),
        nx=nx,
        ny=ny,
        facet_ids=ids,
        flat=flat,
    )


def _shared_spacing(a: _Sublattice, b: _Sublattice, c: np.ndarray):
    """Common lattice spacing of the two sublattices (None on mismatch)."""
    sx = []
    sy = []
    for blk in (a, b):
        xs = np.unique(np.round(c[blk.facet_ids, 0], 9))
        ys = np.unique(np.round(c[blk.facet_ids, 1], 9))
        if len(xs) > 1:
            sx.append(float(xs[1] - xs[0]))
        if len(ys) > 1:
            sy.append(float(ys[1] - ys[0]))
    for s in (sx, sy):
        if len(s) == 2 and abs(s[0] - s[1]) > _COORD_TOL:
            return None, None
    # degenerate single-row/column lattices never index the spacing
    dx = sx[0] if sx else 1.0
    dy = sy[0] if sy else 1.0
    return dx, dy


class PlanarPropagator:
    """Radiates currents from one recognised panel to a parallel one.

    Kernel spectra are precomputed per (source grid, observer grid, medium)
    and reused across calls; the bounce cascade revisits the same pair every
    order and every focus, which is what makes the FFT path pay off.
    """

    def __init__(self, src: PlanarGrid, obs: PlanarGrid, k: complex, eta: complex):
        if abs(src.dx - obs.dx) > _COORD_TOL or abs(src.dy - obs.dy) > _COORD_TOL:
            raise ValueError("source and observer lattice spacings differ")
        if abs(obs.z - src.z) < _MIN_SEPARATION_MM:
            raise ValueError("panels too close for the planar path")
        self.src = src
        self.obs = obs
        self.k = complex(k)
        self.eta = complex(eta)
        self._a1 = 1j * self.eta / (4.0 * np.pi * self.k)
        self._a2 = 1j / (4.0 * np.pi * self.k * self.eta)
        self._b = 1.0 / (4.0 * np.pi)
        nxs, nys = src.blocks[0].nx, src.blocks[0].ny
        nxo, nyo = obs.blocks[0].nx, obs.blocks[0].ny
        self._shape_src = (nxs, nys)
        self._shape_obs = (nxo, nyo)
        self._pq = (nxo + nxs - 1, nyo + nys - 1)
        # kernel FFTs per (obs block, src block)
        self._khat = {
            (bo, bs): self._kernel_ffts(src.blocks[bs], obs.blocks[bo])
            for bo in range(2)
            for bs in range(2)
        }

    def _kernel_ffts(self, sb: _Sublattice, ob: _Sublattice) -> dict[str, np.ndarray]:
        p, q = self._pq
        m = np.arange(p)
        m = np.where(m < self._shape_obs[0], m, m - p)  # signed I - J offsets
        n = np.arange(q)
        n = np.where(n < self._shape_obs[1], n, n - q)
        ddx = (ob.origin_x - sb.origin_x) + m * self.src.dx
        ddy = (ob.origin_y - sb.origin_y) + n * self.src.dy
        dz = self.obs.z - self.src.z
        gx, gy = np.meshgrid(ddx, ddy, indexing="ij")
        r = np.sqrt(gx * gx + gy * gy + dz * dz)
        kr = self.k * r
        r3 = r * r * r
        g1 = (-1.0 - 1j * kr + kr * kr) / r3
        g2 = (3.0 + 3j * kr - kr * kr) / (r3 * r * r)
        g3 = (1.0 + 1j * kr) / r3
        phase = np.exp(-1j * kr) * self.src.area
        p1 = g1 * phase
        g2p = g2 * phase
        g3p = g3 * phase
        fft2 = np.fft.fft2
        out = {
            "p1": fft2(p1),
            "xx": fft2(g2p * gx * gx),
            "xy": fft2(g2p * gx * gy),
            "xz": fft2(g2p * gx * dz),
            "yy": fft2(g2p * gy * gy),
            "yz": fft2(g2p * gy * dz),
            "zz": fft2(g2p * dz * dz),
            "rx": fft2(g3p * gx),
            "ry": fft2(g3p * gy),
            "rz": fft2(g3p * dz),
        }
        return out

    def _source_spectra(self, vals: np.ndarray, bs: int) -> list[np.ndarray]:
        blk = self.src.blocks[bs]
        nx, ny = self._shape_src
        out = []
        for c in range(3):
            grid = np.zeros(nx * ny, dtype=complex)
            grid[blk.flat] = vals[blk.facet_ids, c]
            out.append(np.fft.fft2(grid.reshape(nx, ny), s=self._pq))
        return out

    def radiate(self, current_j: np.ndarray, current_m: np.ndarray,
                has_j: bool = True, has_m: bool = True):
        """(E, H) at the observer panel's facet centroids, mesh order."""
        n_obs = len(self.obs.mesh)
        e_out = np.zeros((n_obs, 3), dtype=complex)
        h_out = np.zeros((n_obs, 3), dtype=complex)
        if not (has_j or has_m):
            return e_out, h_out
        a1, a2, b = self._a1, self._a2, self._b
        nxo, nyo = self._shape_obs
        for bo in range(2):
            spec_e = [0.0, 0.0, 0.0]
            spec_h = [0.0, 0.0, 0.0]
            for bs in range(2):
                kh = self._khat[(bo, bs)]
                d = {c: kh["p1"] + kh[c + c] for c in "xyz"}  # G1 + G2*dc^2
                if has_j:
                    jx, jy, jz = self._source_spectra(current_j, bs)
                    spec_e[0] = spec_e[0] - a1 * (
                        d["x"] * jx + kh["xy"] * jy + kh["xz"] * jz
                    )
                    spec_e[1] = spec_e[1] - a1 * (
                        kh["xy"] * jx + d["y"] * jy + kh["yz"] * jz
                    )
                    spec_e[2] = spec_e[2] - a1 * (
                        kh["xz"] * jx + kh["yz"] * jy + d["z"] * jz
                    )
                    spec_h[0] = spec_h[0] + b * (kh["rz"] * jy - kh["ry"] * jz)
                    spec_h[1] = spec_h[1] + b * (kh["rx"] * jz - kh["rz"] * jx)
                    spec_h[2] = spec_h[2] + b * (kh["ry"] * jx - kh["rx"] * jy)
                if has_m:
                    mx, my, mz = self._source_spectra(current_m, bs)
                    spec_h[0] = spec_h[0] - a2 * (
                        d["x"] * mx + kh["xy"] * my + kh["xz"] * mz
                    )
                    spec_h[1] = spec_h[1] - a2 * (
                        kh["xy"] * mx + d["y"] * my + kh["yz"] * mz
                    )
                    spec_h[2] = spec_h[2] - a2 * (
                        kh["xz"] * mx + kh["yz"] * my + d["z"] * mz
                    )
                    spec_e[0] = spec_e[0] - b * (kh["rz"] * my - kh["ry"] * mz)
                    spec_e[1] = spec_e[1] - b * (kh["rx"] * mz - kh["rz"] * mx)
                    spec_e[2] = spec_e[2] - b * (kh["ry"] * mx - kh["rx"] * my)
            blk = self.obs.blocks[bo]
            for c in range(3):
                if has_j or has_m:
                    field = np.fft.ifft2(spec_e[c])[:nxo, :nyo].reshape(-1)
                    e_out[blk.facet_ids, c] = field[blk.flat]
                    field = np.fft.ifft2(spec_h[c])[:nxo, :nyo].reshape(-1)
                    h_out[blk.facet_ids, c] = field[blk.flat]
        return e_out, h_out
