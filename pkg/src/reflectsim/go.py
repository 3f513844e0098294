"""Geometrical-optics forward model.

Each ray runs feed -> patch -> slab front face -> return patch -> receive
feed.  Amplitude spreading and phase delay follow the compound-spreading
forms; the slab (with optional air gap, PEC-backed) enters through a
multilayer transmission-line reflection coefficient, which sums the
infinite internal bounce series analytically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import decaying_sqrt
from .masks import binary_phase
from .scene import Scene

__all__ = [
    "TLStack",
    "tl_reflection",
    "RayTrace",
    "trace_rays",
    "GoModel",
]

_MIN_COS = 1e-9


@dataclass(frozen=True)
class TLStack:
    """Planar layer stack, listed front (air side) to back.

    `layers` holds (relative permittivity, thickness in mm) pairs.  The
    stack terminates in PEC by default; a semi-infinite dielectric
    termination is available for test stacks.  Layer permittivities may be
    numpy arrays (broadcast against the incidence angle) for sweeps.
    """

    layers: tuple[tuple[complex, float], ...]
    pec_backed: bool = True
    eps_back: complex = 1.0 + 0.0j

    def __post_init__(self):
        for eps, t in self.layers:
            if np.any(np.asarray(t) < 0):
                raise ValueError("layer thickness must be >= 0")

    @classmethod
    def slab_on_plate(
        cls, eps: complex, thickness_mm: float, gap_mm: float = 0.0
    ) -> "TLStack":
        """Dielectric slab over the conducting plate, with an optional air
        gap between slab and plate."""
        layers: list[tuple[complex, float]] = []
        if thickness_mm > 0:
            layers.append((eps, float(thickness_mm)))
        if gap_mm > 0:
            layers.append((1.0 + 0.0j, float(gap_mm)))
        return cls(layers=tuple(layers))

    @property
    def total_thickness(self) -> float:
        return float(sum(t for _, t in self.layers))


def tl_reflection(stack: TLStack, cos_theta, k0: float, mode: str):
    """Reflection coefficient of the stack for incidence from air.

    Admittances are cascaded from the back wall to the front face with the
    input admittance carried projectively as a numerator/denominator pair,
    so the PEC short (infinite admittance) is exact rather than a large
    number.  Per-layer z-wavenumber k_z = k0*sqrt(eps - sin^2) on the
    decaying branch.  TE admittance is proportional to k_z, TM to eps/k_z;
    common constants cancel in the ratio.
    """
    if mode not in ("te", "tm"):
        raise ValueError(f"mode must be 'te' or 'tm', got {mode!r}")
    c1 = np.asarray(cos_theta, dtype=complex)
    s2 = 1.0 - c1 * c1
    if stack.pec_backed:
        num = np.asarray(1.0 + 0.0j)
        den = np.asarray(0.0 + 0.0j)
    else:
        kzb = k0 * decaying_sqrt(np.asarray(stack.eps_back, dtype=complex) - s2)
        num = stack.eps_back * k0 / kzb if mode == "tm" else kzb / k0
        den = np.asarray(1.0 + 0.0j)
    for eps, t in reversed(stack.layers):
        eps = np.asarray(eps, dtype=complex)
        kz = k0 * decaying_sqrt(eps - s2)
        y = eps * k0 / kz if mode == "tm" else kz / k0
        ph = kz * t
        c = np.cos(ph)
        s = np.sin(ph)
        num, den = y * (num * c + 1j * y * den * s), y * den * c + 1j * num * s
    if mode == "te":
        y1 = c1
        return (y1 * den - num) / (y1 * den + num)
    # TM: air admittance 1/cos, multiplied through to stay finite at grazing
    return (den - num * c1) / (den + num * c1)


@dataclass(frozen=True)
class RayTrace:
    """Feed-to-feed ray geometry for one (feed, focus, front plane) triple.

    All arrays are per transmit patch (length M).  Dropped rays (return
    point outside every patch lattice) have kept=False and zeroed return
    fields.
    """

    patch_centers: np.ndarray  # (M, 3)
    direction: np.ndarray  # (M, 3) unit, patch -> focus
    cos_theta: np.ndarray  # (M,) incidence cosine at the front face
    hit_points: np.ndarray  # (M, 3) on the plane z = z_front
    is_te: np.ndarray  # (M,) bool
    r1: np.ndarray  # feed -> patch
    r2: np.ndarray  # patch -> hit point (= hit -> return patch plane, r3)
    r4: np.ndarray  # return patch -> receive feed
    r5: np.ndarray  # return patch -> focus
    src_factor: np.ndarray  # (M,) mask factor at the transmit patch
    ret_factor: np.ndarray  # (M,) mask factor at the return patch
    ret_array: np.ndarray  # (M,) receive array index, -1 if dropped
    ret_flat: np.ndarray  # (M,) flat patch index on the receive array
    kept: np.ndarray  # (M,) bool

    @property
    def n_rays(self) -> int:
        return self.patch_centers.shape[0]

    @property
    def n_dropped(self) -> int:
        return int(np.count_nonzero(~self.kept))


def trace_rays(scene: Scene, p: int, focus: np.ndarray, z_front: float) -> RayTrace:
    """Trace every patch ray of feed p to the front plane and back.

    The reflected direction mirrors the incident one about the plane
    normal; the return point is snapped to the nearest patch center of
    whichever array lattice contains it (nearest index via ceil(v - 0.5),
    so exact midpoints take the lower index).  Points inside no lattice
    drop the ray.
    """
    focus = np.asarray(focus, dtype=float)
    if focus[2] <= 0:
        raise ValueError("focus must lie above the array plane (z > 0)")
    fara = scene.faras[p]
    centers = fara.array.patch_centers
    m = centers.shape[0]
    k0 = scene.constants.k0

    d_feed = centers - fara.feed.center[None, :]
    r1 = np.linalg.norm(d_feed, axis=1)
    to_focus = focus[None, :] - centers
    dist_focus = np.linalg.norm(to_focus, axis=1)
    u = to_focus / dist_focus[:, None]
    cos_theta = u[:, 2]
    ok = cos_theta > _MIN_COS

    r2 = np.where(ok, z_front / np.where(ok, cos_theta, 1.0), 0.0)
    hits = centers + u * r2[:, None]
    arrival_xy = centers[:, :2] + 2.0 * r2[:, None] * u[:, :2]

    ret_array = np.full(m, -1, dtype=np.int64)
    ret_flat = np.zeros(m, dtype=np.int64)
    ret_centers = np.zeros((m, 3))
    for q, cand in enumerate(scene.faras):
        arr = cand.array
        ms = arr.m_side
        rel = (arrival_xy - arr.center[None, :2]) / arr.pitch_mm + (ms - 1) / 2.0
        idx = np.ceil(rel - 0.5).astype(np.int64)
        inside = (
            ok
            & (idx[:, 0] >= 0)
            & (idx[:, 0] < ms)
            & (idx[:, 1] >= 0)
            & (idx[:, 1] < ms)
            & (ret_array < 0)  # first containing lattice wins (lattices disjoint)
        )
        flat = idx[:, 1] * ms + idx[:, 0]
        ret_array[inside] = q
        ret_flat[inside] = flat[inside]
        ret_centers[inside] = arr.patch_centers[flat[inside]]
    kept = ret_array >= 0

    r4 = np.zeros(m)
    r5 = np.zeros(m)
    ret_factor = np.zeros(m)
    src_factor = binary_phase(fara, focus, k0).phase_factor.astype(float)
    for q in range(len(scene.faras)):
        sel = kept & (ret_array == q)
        if not np.any(sel):
            continue
        recv = scene.faras[q]
        r4[sel] = np.linalg.norm(ret_centers[sel] - recv.feed.center[None, :], axis=1)
        r5[sel] = np.linalg.norm(ret_centers[sel] - focus[None, :], axis=1)
        ret_factor[sel] = binary_phase(recv, focus, k0).phase_factor.astype(float)[
            ret_flat[sel]
        ]

    is_te = u[:, 0] ** 2 > u[:, 1] ** 2
    return RayTrace(
        patch_centers=centers,
        direction=u,
        cos_theta=cos_theta,
        hit_points=hits,
        is_te=is_te,
        r1=r1,
        r2=r2,
        r4=r4,
        r5=r5,
        src_factor=src_factor,
        ret_factor=ret_factor,
        ret_array=ret_array,
        ret_flat=ret_flat,
        kept=kept,
    )


@dataclass(frozen=True)
class _RayBundle:
    """Angle-sorted, permittivity-independent ray weights for one
    (feed, focus, front plane): prediction = coeff_te . Gamma_te(eps)
    + coeff_tm . Gamma_tm(eps)."""

    cos_te: np.ndarray
    coeff_te: np.ndarray
    cos_tm: np.ndarray
    coeff_tm: np.ndarray
    n_rays: int
    n_dropped: int


class GoModel:
    """Forward model bound to one scene.

    spreading="verbatim" keeps the return-leg denominator exactly as the
    compound form self-evaluates (a constant 2); "textbook" replaces it by
    cumulative-distance spreading 1 + r3/(r1 + r2).
    """

    def __init__(self, scene: Scene, spreading: str = "verbatim"):
        if spreading not in ("verbatim", "textbook"):
            raise ValueError(f"spreading must be 'verbatim' or 'textbook', got {spreading!r}")
        if scene.plate is None:
            raise ValueError("scene has no plate: the forward model needs z_bg")
        self.scene = scene
        self.spreading = spreading
        self.z_bg = scene.plate.z_bg_mm
        self._bundles: dict[tuple, _RayBundle] = {}

    # ------------------------------------------------------------------

    def _bundle(self, p: int, focus: np.ndarray, z_front: float) -> _RayBundle:
        key = (p, round(float(focus[0]), 9), round(float(focus[1]), 9),
               round(float(focus[2]), 9), round(float(z_front), 9), self.spreading)
        cached = self._bundles.get(key)
        if cached is not None:
            return cached
        tr = trace_rays(self.scene, p, focus, z_front)
        k0 = self.scene.constants.k0
        kept = tr.kept
        r1, r2, r4, r5 = tr.r1[kept], tr.r2[kept], tr.r4[kept], tr.r5[kept]
        r3 = r2
        if self.spreading == "verbatim":
            d3 = 2.0
        else:
            d3 = 1.0 + r3 / (r1 + r2)
        path = r1 + r2 + r3 + r4
        coeff = (
            tr.src_factor[kept]
            * tr.ret_factor[kept]
            * np.exp(-1j * k0 * path)
            / (r1 * (1.0 + r2 / r1) * d3 * (1.0 + r4 / r5))
        )
        te = tr.is_te[kept]
        bundle = _RayBundle(
            cos_te=tr.cos_theta[kept][te].copy(),
            coeff_te=coeff[te].copy(),
            cos_tm=tr.cos_theta[kept][~te].copy(),
            coeff_tm=coeff[~te].copy(),
            n_rays=tr.n_rays,
            n_dropped=tr.n_dropped,
        )
        self._bundles[key] = bundle
        return bundle

    def _predict_stack(
        self, focus: np.ndarray, stack: TLStack, z_front: float, n_out: int
    ) -> np.ndarray:
        """Sum over feeds of coeff . Gamma; eps arrays broadcast through."""
        total = np.zeros(n_out, dtype=complex)
        for p in range(len(self.scene.faras)):
            b = self._bundle(p, focus, z_front)
            if b.cos_te.size:
                g = tl_reflection(stack, b.cos_te[:, None], self.scene.constants.k0, "te")
                total = total + np.tensordot(b.coeff_te, g, axes=(0, 0))
            if b.cos_tm.size:
                g = tl_reflection(stack, b.cos_tm[:, None], self.scene.constants.k0, "tm")
                total = total + np.tensordot(b.coeff_tm, g, axes=(0, 0))
        return total

    # ------------------------------------------------------------------

    def predict(
        self,
        focus: np.ndarray,
        eps: complex,
        thickness_mm: float,
        gap_mm: float = 0.0,
        e0: complex = 1.0,
    ) -> complex:
        """Received amplitude for one slab hypothesis at one focus."""
        stack = TLStack.slab_on_plate(eps, thickness_mm, gap_mm)
        z_front = self.z_bg - thickness_mm - gap_mm
        out = self._predict_stack(np.asarray(focus, float), stack, z_front, 1)
        return complex(e0 * out[0])

    def predict_eps_grid(
        self,
        focus: np.ndarray,
        eps_values: np.ndarray,
        thickness_mm: float,
        gap_mm: float = 0.0,
    ) -> np.ndarray:
        """Received amplitude over a flat array of permittivity hypotheses
        sharing one thickness (one ray geometry, vectorized reflection)."""
        eps_values = np.asarray(eps_values, dtype=complex).reshape(1, -1)
        layers: list[tuple[complex, float]] = []
        if thickness_mm > 0:
            layers.append((eps_values, float(thickness_mm)))
        if gap_mm > 0:
            layers.append((1.0 + 0.0j, float(gap_mm)))
        stack = TLStack(layers=tuple(layers))
        z_front = self.z_bg - thickness_mm - gap_mm
        return self._predict_stack(
            np.asarray(focus, float), stack, z_front, eps_values.shape[1]
        )

    def calibration(self, xy: np.ndarray | None = None, e0: complex = 1.0) -> complex:
        """Reference amplitude: bare plate, focus on the plate plane."""
        if xy is None:
            if self.scene.target is not None:
                xy = np.asarray(self.scene.target.center[:2], dtype=float)
            else:
                xy = np.asarray(self.scene.plate.center_mm, dtype=float)
        focus = np.array([xy[0], xy[1], self.z_bg])
        return self.predict(focus, 1.0 + 0.0j, 0.0, 0.0, e0=e0)
