"""Physical-optics imaging chain.

Per focus point and feed: horn -> patch currents -> 1-bit mask -> incident
fields on the target surfaces -> induced currents with an interior
multi-bounce cascade inside the slab -> received amplitude by reciprocity.
A brute-force back-propagation receive (target -> patches -> refocus -> horn
mouth) is available as an independent cross-check of the reciprocity form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .kernels import CurrentSheet, FieldSet, Medium, induce_currents, radiate
from .masks import apply_mask, binary_phase
from .planar import PlanarGrid, PlanarPropagator
from .scene import Scene

logger = logging.getLogger(__name__)

__all__ = [
    "CascadeResult",
    "ReceivedScan",
    "ProfileImage",
    "PoImager",
    "reconstruct_profile",
]

DEFAULT_K_ORDER = 3


@dataclass(frozen=True)
class CascadeResult:
    """Slab-face currents per reflection order for one feed.

    `obj_by_order[K]` holds the air-side front-face totals for a K-th order
    run: the external currents minus the accumulated interior returns.
    `bounce_sheets[k-1]` holds the k-th interior-return currents (slab side).
    """

    obj_by_order: dict[int, CurrentSheet]
    bounce_sheets: list[CurrentSheet]
    body_sheet: CurrentSheet | None


@dataclass(frozen=True)
class ReceivedScan:
    """Received complex amplitudes over a set of focus points."""

    foci: np.ndarray
    orders: tuple[int, ...]
    e_rec: dict[int, np.ndarray]  # order -> (N,) total over feeds
    per_feed: dict[int, np.ndarray]  # order -> (N, P)
    backprop: np.ndarray | None  # (N, P) at the primary order, or None

    @property
    def primary(self) -> np.ndarray:
        return self.e_rec[self.orders[0]]


@dataclass(frozen=True)
class ProfileImage:
    """Imaged depth map: per transverse pixel, argmax_z |E_rec|."""

    x_mm: np.ndarray
    y_mm: np.ndarray
    z_mm: np.ndarray
    z_imaging: np.ndarray  # (ny, nx)
    peak_magnitude: np.ndarray  # (ny, nx)
    k_order: int


class PoImager:
    """Imaging engine bound to one scene.

    Feed-to-patch illumination is focus-independent and cached; everything
    downstream is evaluated per focus point.  All stages are applied per
    feed (the TE/TM decomposition is direction-dependent, so currents from
    different feeds are induced separately and summed afterwards), which
    keeps feed superposition exact.
    """

    def __init__(self, scene: Scene, k_order: int = DEFAULT_K_ORDER, workers: int = 1):
        if k_order < 1:
            raise ValueError("k_order must be >= 1")
        self.scene = scene
        self.k_order = k_order
        self.workers = workers
        self.air = Medium.free_space(scene.constants)
        self.slab_medium = (
            Medium.in_dielectric(scene.constants, scene.target.eps.value)
            if scene.target is not None
            else None
        )
        # unmasked PEC patch currents per fara (horn mouth -> patch centroids)
        self._patch_sheets: list[CurrentSheet] = []
        for fara in scene.faras:
            feed_sheet = CurrentSheet(
                mesh=fara.feed.mesh,
                J=np.broadcast_to(
                    fara.feed.polarization.astype(complex), (len(fara.feed.mesh), 3)
                ).copy(),
                M=np.zeros((len(fara.feed.mesh), 3), dtype=complex),
            )
            inc = radiate(feed_sheet, fara.array.mesh.centroids, self.air, workers)
            self._patch_sheets.append(
                induce_currents(
                    inc, fara.array.mesh, eta_outer=complex(scene.constants.eta0)
                )
            )
        # the in-slab bounce legs run between two parallel congruent panels;
        # when that structure is recognised they use the FFT convolution path
        self._planar_down: PlanarPropagator | None = None
        self._planar_up: PlanarPropagator | None = None
        if scene.obj_mesh is not None and scene.bot_mesh is not None:
            g_obj = PlanarGrid.from_mesh(scene.obj_mesh)
            g_bot = PlanarGrid.from_mesh(scene.bot_mesh)
            med = self.slab_medium
            if g_obj is not None and g_bot is not None and med is not None:
                try:
                    self._planar_down = PlanarPropagator(g_obj, g_bot, med.k, med.eta)
                    self._planar_up = PlanarPropagator(g_bot, g_obj, med.k, med.eta)
                except ValueError:
                    self._planar_down = self._planar_up = None

    # ------------------------------------------------------------------
    # forward illumination
    # ------------------------------------------------------------------

    def masked_patch_sheet(self, p: int, focus: np.ndarray) -> CurrentSheet:
        mask = binary_phase(self.scene.faras[p], focus, self.scene.constants.k0)
        return apply_mask(self._patch_sheets[p], mask)

    def free_field(self, focus: np.ndarray, obs: np.ndarray) -> FieldSet:
        """Field of all masked arrays at `obs`, no scattering surfaces."""
        total = None
        for p in range(len(self.scene.faras)):
            f = radiate(self.masked_patch_sheet(p, focus), obs, self.air, self.workers)
            total = f if total is None else total + f
        return total

    def psf_magnitude(self, focus: np.ndarray, obs: np.ndarray) -> np.ndarray:
        """|E| of the focused illumination at `obs` (direct horn spillover
        excluded: the focusing beam is the masked-array field)."""
        return np.linalg.norm(self.free_field(focus, obs).E, axis=1)

    def _target_observers(self) -> tuple[np.ndarray, int]:
        scene = self.scene
        if scene.body_mesh is None:
            raise ValueError("scene has no plate: nothing to image")
        if scene.obj_mesh is not None:
            obs = np.concatenate(
                [scene.obj_mesh.centroids, scene.body_mesh.centroids], axis=0
            )
            return obs, len(scene.obj_mesh)
        return scene.body_mesh.centroids, 0

    def illuminate(self, p: int, focus: np.ndarray) -> FieldSet:
        """Incident fields on the target surfaces from feed p through its mask."""
        obs, _ = self._target_observers()
        return radiate(self.masked_patch_sheet(p, focus), obs, self.air, self.workers)

    # ------------------------------------------------------------------
    # currents: external + interior cascade
    # ------------------------------------------------------------------

    def cascade(self, fields: FieldSet, k_max: int | None = None) -> CascadeResult:
        """Induce currents from one feed's incident fields on the target.

        The slab interior is driven by the negated exterior currents
        radiating with in-medium kernels; each interior reflection at the
        front face yields slab-side currents whose negation is the air-side
        leak, accumulated with a minus sign into the front-face totals.
        """
        scene = self.scene
        k_max = self.k_order if k_max is None else k_max
        eta0 = complex(scene.constants.eta0)
        _, n_obj = self._split_sizes()

        body_fields = FieldSet(E=fields.E[n_obj:], H=fields.H[n_obj:])
        body_sheet = (
            induce_currents(body_fields, scene.body_mesh, eta_outer=eta0)
            if scene.body_mesh is not None
            else None
        )
        if scene.obj_mesh is None or scene.target is None:
            return CascadeResult(obj_by_order={}, bounce_sheets=[], body_sheet=body_sheet)

        eps = scene.target.eps.value
        med = self.slab_medium
        obj_fields = FieldSet(E=fields.E[:n_obj], H=fields.H[:n_obj])
        external = induce_currents(
            obj_fields, scene.obj_mesh, eta_outer=eta0, eps_outer=1.0, eps_inner=eps
        )
        totals = {1: external}
        bounces: list[CurrentSheet] = []
        driver = external.scaled(-1.0)  # interior side of the front face
        current = external
        for k in range(1, k_max):
            f_bot = self._in_slab_radiate(driver, self._planar_down, scene.bot_mesh)
            bot_sheet = induce_currents(
                f_bot, scene.bot_mesh, eta_outer=med.eta, eps_outer=eps, eps_inner=None
            )
            f_obj = self._in_slab_radiate(bot_sheet, self._planar_up, scene.obj_mesh)
            refl = induce_currents(
                f_obj,
                scene.obj_mesh,
                eta_outer=med.eta,
                eps_outer=eps,
                eps_inner=1.0,
                normal_sign=-1.0,
            )
            bounces.append(refl)
            current = current - refl
            totals[k + 1] = current
            driver = refl
        return CascadeResult(obj_by_order=totals, bounce_sheets=bounces, body_sheet=body_sheet)

    def _in_slab_radiate(
        self,
        sheet: CurrentSheet,
        prop: PlanarPropagator | None,
        obs_mesh,
    ) -> FieldSet:
        if prop is not None:
            e, h = prop.radiate(
                sheet.J,
                sheet.M,
                has_j=bool(np.any(sheet.J)),
                has_m=bool(np.any(sheet.M)),
            )
            return FieldSet(E=e, H=h)
        return radiate(sheet, obs_mesh.centroids, self.slab_medium, self.workers)

    def _split_sizes(self) -> tuple[int, int]:
        scene = self.scene
        n_obj = 0 if scene.obj_mesh is None else len(scene.obj_mesh)
        n_body = 0 if scene.body_mesh is None else len(scene.body_mesh)
        return n_obj + n_body, n_obj

    # ------------------------------------------------------------------
    # receive
    # ------------------------------------------------------------------

    def _aperture_norm(self, p: int) -> float:
        # integral of e_rec . J_inc over the horn mouth (uniform co-polarised
        # unit current: equals the mouth area)
        feed = self.scene.faras[p].feed
        j_inc = np.broadcast_to(feed.polarization, (len(feed.mesh), 3))
        co = np.einsum("ij,j->i", j_inc, feed.polarization)
        return float(np.sum(co * feed.mesh.areas))

    def _receive_numerator(
        self,
        fields: FieldSet,
        obj_sheet: CurrentSheet | None,
        body_sheet: CurrentSheet | None,
    ) -> complex:
        scene = self.scene
        n_obj = 0 if scene.obj_mesh is None else len(scene.obj_mesh)
        total = 0.0 + 0.0j
        if obj_sheet is not None and n_obj:
            e = fields.E[:n_obj]
            h = fields.H[:n_obj]
            total += np.sum(
                (
                    np.einsum("ij,ij->i", e, obj_sheet.J)
                    - np.einsum("ij,ij->i", h, obj_sheet.M)
                )
                * scene.obj_mesh.areas
            )
        if body_sheet is not None:
            e = fields.E[n_obj:]
            total += np.sum(np.einsum("ij,ij->i", e, body_sheet.J) * scene.body_mesh.areas)
        return complex(total)

    def received(
        self,
        focus: np.ndarray,
        k_orders: tuple[int, ...] | None = None,
        with_backprop: bool = False,
    ) -> tuple[dict[int, np.ndarray], np.ndarray | None]:
        """Received amplitude per feed at one focus, for each cascade order.

        Returns (per_feed, backprop): per_feed maps order -> (P,) complex
        array (reciprocity receive, total currents of all feeds); backprop is
        the brute-force path at the primary order, or None.
        """
        scene = self.scene
        orders = tuple(k_orders) if k_orders else (self.k_order,)
        k_max = max(orders)
        n_feed = len(scene.faras)

        fields = [self.illuminate(p, focus) for p in range(n_feed)]
        cascades = [self.cascade(fields[p], k_max=k_max) for p in range(n_feed)]

        body_total = None
        if cascades[0].body_sheet is not None:
            body_total = cascades[0].body_sheet
            for c in cascades[1:]:
                body_total = CurrentSheet(
                    mesh=body_total.mesh,
                    J=body_total.J + c.body_sheet.J,
                    M=body_total.M + c.body_sheet.M,
                )

        obj_totals: dict[int, CurrentSheet | None] = {}
        for k in orders:
            if cascades[0].obj_by_order:
                sheet = cascades[0].obj_by_order[k]
                for c in cascades[1:]:
                    sheet = CurrentSheet(
                        mesh=sheet.mesh,
                        J=sheet.J + c.obj_by_order[k].J,
                        M=sheet.M + c.obj_by_order[k].M,
                    )
                obj_totals[k] = sheet
            else:
                obj_totals[k] = None

        per_feed = {
            k: np.array(
                [
                    self._receive_numerator(fields[p], obj_totals[k], body_total)
                    / self._aperture_norm(p)
                    for p in range(n_feed)
                ]
            )
            for k in orders
        }
        backprop = None
        if with_backprop:
            k = orders[0]
            backprop = np.array(
                [
                    self._backprop_amplitude(p, focus, obj_totals[k], body_total)
                    for p in range(n_feed)
                ]
            )
        return per_feed, backprop

    def _backprop_amplitude(
        self,
        p: int,
        focus: np.ndarray,
        obj_sheet: CurrentSheet | None,
        body_sheet: CurrentSheet | None,
    ) -> complex:
        """Brute-force receive: target currents -> patches -> refocus -> horn.

        Radiates the total target currents to the receive array, induces PEC
        patch currents, applies the receive mask and radiates to the horn
        mouth; returns the area-averaged co-polarised field there.
        """
        scene = self.scene
        fara = scene.faras[p]
        sheets = [s for s in (obj_sheet, body_sheet) if s is not None]
        inc = None
        for s in sheets:
            f = radiate(s, fara.array.mesh.centroids, self.air, self.workers)
            inc = f if inc is None else inc + f
        patch_sheet = induce_currents(
            inc, fara.array.mesh, eta_outer=complex(scene.constants.eta0)
        )
        mask = binary_phase(fara, focus, scene.constants.k0)
        patch_sheet = apply_mask(patch_sheet, mask)
        at_horn = radiate(patch_sheet, fara.feed.mesh.centroids, self.air, self.workers)
        co = np.einsum("ij,j->i", at_horn.E, fara.feed.polarization.astype(complex))
        return complex(
            np.sum(co * fara.feed.mesh.areas) / np.sum(fara.feed.mesh.areas)
        )

    # ------------------------------------------------------------------
    # scans
    # ------------------------------------------------------------------

    def scan(
        self,
        foci: np.ndarray,
        k_orders: tuple[int, ...] | None = None,
        with_backprop: bool = False,
    ) -> ReceivedScan:
        """Received amplitude at each focus point of `foci` (N, 3)."""
        foci = np.atleast_2d(np.asarray(foci, dtype=float))
        orders = tuple(k_orders) if k_orders else (self.k_order,)
        n = foci.shape[0]
        n_feed = len(self.scene.faras)
        per_feed = {k: np.zeros((n, n_feed), dtype=complex) for k in orders}
        bp = np.zeros((n, n_feed), dtype=complex) if with_backprop else None
        for i, focus in enumerate(foci):
            pf, pb = self.received(focus, k_orders=orders, with_backprop=with_backprop)
            for k in orders:
                per_feed[k][i] = pf[k]
            if with_backprop:
                bp[i] = pb
            logger.debug("scan %d/%d focus=%s done", i + 1, n, focus)
        e_rec = {k: per_feed[k].sum(axis=1) for k in orders}
        return ReceivedScan(
            foci=foci, orders=orders, e_rec=e_rec, per_feed=per_feed, backprop=bp
        )


def reconstruct_profile(
    scene: Scene,
    x_mm: np.ndarray,
    y_mm: np.ndarray,
    z_mm: np.ndarray,
    k_order: int = DEFAULT_K_ORDER,
    workers: int = 1,
) -> ProfileImage:
    """Imaged depth per transverse pixel: argmax_z |E_rec| (first max wins,
    so the smallest z takes ties)."""
    imager = PoImager(scene, k_order=k_order, workers=workers)
    x_mm = np.atleast_1d(np.asarray(x_mm, dtype=float))
    y_mm = np.atleast_1d(np.asarray(y_mm, dtype=float))
    z_mm = np.atleast_1d(np.asarray(z_mm, dtype=float))
    z_img = np.zeros((y_mm.size, x_mm.size))
    peak = np.zeros_like(z_img)
    for iy, y in enumerate(y_mm):
        for ix, x in enumerate(x_mm):
            foci = np.column_stack(
                [np.full(z_mm.size, x), np.full(z_mm.size, y), z_mm]
            )
            scan = imager.scan(foci)
            mag = np.abs(scan.primary)
            best = int(np.argmax(mag))
            z_img[iy, ix] = z_mm[best]
            peak[iy, ix] = mag[best]
    return ProfileImage(
        x_mm=x_mm, y_mm=y_mm, z_mm=z_mm, z_imaging=z_img, peak_magnitude=peak,
        k_order=k_order
    )
