"""Electromagnetic kernels: radiation integral dispatch, Fresnel coefficients
and surface-current induction.

The radiation integral has two interchangeable backends: a compiled Cython
core and a pure-numpy fallback.  Selection happens once at import; set
``REFLECTSIM_FORCE_NUMPY=1`` to force the fallback (used by the benchmark and
the backend-parity test).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .mesh import SurfaceMesh
from .scene import PhysicalConstants

__all__ = [
    "BACKEND",
    "SingularKernelError",
    "Medium",
    "FieldSet",
    "CurrentSheet",
    "radiate_pairs",
    "radiate",
    "decaying_sqrt",
    "fresnel_coefficients",
    "induce_currents",
]

# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

from . import _radiate_np as _np_backend

if os.environ.get("REFLECTSIM_FORCE_NUMPY"):
    _backend = _np_backend
else:
    try:
        from . import _radiate_cy as _backend  # type: ignore[no-redef]
    except ImportError:  # compiled core unavailable; fallback keeps working
        _backend = _np_backend

BACKEND: str = _backend.BACKEND_NAME
SingularKernelError = _np_backend.SingularKernelError

if _backend is not _np_backend:
    # single exception type regardless of backend
    _backend.SingularKernelError = SingularKernelError  # type: ignore[attr-defined]


def radiate_pairs(src_pos, areas, current_j, current_m, obs, k, eta, workers=1,
                  has_j=True, has_m=True):
    """Backend-dispatched facet-to-observer field sums (see `_radiate_np`)."""
    try:
        return _backend.radiate_pairs(
            src_pos, areas, current_j, current_m, obs, k, eta, workers,
            has_j, has_m,
        )
    except Exception as exc:  # normalise the singular-kernel error type
        if exc.__class__.__name__ == "SingularKernelError" and not isinstance(
            exc, SingularKernelError
        ):
            raise SingularKernelError(str(exc)) from None
        raise


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Medium:
    """Homogeneous propagation medium: wavenumber and wave impedance."""

    k: complex
    eta: complex

    @classmethod
    def free_space(cls, constants: PhysicalConstants) -> "Medium":
        return cls(k=complex(constants.k0), eta=complex(constants.eta0))

    @classmethod
    def in_dielectric(cls, constants: PhysicalConstants, eps: complex) -> "Medium":
        root = decaying_sqrt(np.asarray(eps, dtype=complex))
        root_c = complex(root)
        return cls(k=constants.k0 * root_c, eta=constants.eta0 / root_c)


@dataclass(frozen=True)
class FieldSet:
    """E and H sampled at a set of points, one row per point."""

    E: np.ndarray
    H: np.ndarray

    def __add__(self, other: "FieldSet") -> "FieldSet":
        return FieldSet(E=self.E + other.E, H=self.H + other.H)


@dataclass(frozen=True)
class CurrentSheet:
    """Equivalent electric/magnetic surface currents on a mesh."""

    mesh: SurfaceMesh
    J: np.ndarray
    M: np.ndarray

    def scaled(self, factor) -> "CurrentSheet":
        return CurrentSheet(mesh=self.mesh, J=self.J * factor, M=self.M * factor)

    def __sub__(self, other: "CurrentSheet") -> "CurrentSheet":
        return CurrentSheet(mesh=self.mesh, J=self.J - other.J, M=self.M - other.M)


def radiate(sheet: CurrentSheet, observers: np.ndarray, medium: Medium,
            workers: int = 1) -> FieldSet:
    """Radiate a current sheet to observer points in a homogeneous medium.

    Identically-zero J or M (PEC sheets carry no M) skip their kernel terms.
    """
    e, h = radiate_pairs(
        sheet.mesh.centroids,
        sheet.mesh.areas,
        sheet.J,
        sheet.M,
        np.ascontiguousarray(observers, dtype=float),
        medium.k,
        medium.eta,
        workers,
        bool(np.any(sheet.J)),
        bool(np.any(sheet.M)),
    )
    return FieldSet(E=e, H=h)


# ---------------------------------------------------------------------------
# Fresnel reflection
# ---------------------------------------------------------------------------


def decaying_sqrt(z: np.ndarray) -> np.ndarray:
    """Square root on the physical propagation branch.

    With the e^{+j omega t} / e^{-jkR} convention a longitudinal wavenumber
    must decay (Im <= 0) wherever the radicand's real part is negative, the
    evanescent and total-internal-reflection region; there the principal
    root is flipped.  For Re(z) > 0 the principal root is kept even when a
    lossy incidence side pushes Im(z) slightly positive: flipping there
    would negate an essentially-real root, making the reflection weight
    jump discontinuously at normal incidence.
    """
    root = np.sqrt(np.asarray(z, dtype=complex))
    return np.where(root.imag > root.real, -root, root)


def fresnel_coefficients(cos_theta, eps_outer, eps_inner=None):
    """Plane-interface reflection coefficients (R_TE, R_TM).

    `eps_outer` is the relative permittivity on the incidence side,
    `eps_inner` the far side; `eps_inner=None` means PEC (R_TE = R_TM = -1).
    Sign convention: at normal incidence R_TE = R_TM = (1 - sqrt(eps_i/eps_o))
    / (1 + sqrt(eps_i/eps_o)); for PEC both are -1 at every angle.
    Accepts scalars or arrays of cos(theta_inc) in [0, 1].
    """
    c = np.asarray(cos_theta, dtype=float)
    if eps_inner is None:
        shape = c.shape
        return (-np.ones(shape, dtype=complex), -np.ones(shape, dtype=complex))
    e1 = complex(eps_outer)
    e2 = complex(eps_inner)
    s2 = 1.0 - c * c
    ratio = e1 / e2
    root = decaying_sqrt(1.0 - ratio * s2)
    # index ratios must be quotients of the per-medium decaying roots; the
    # decaying branch applied to the quotient itself flips the sign of the
    # whole ratio whenever the loss terms put it in the upper half-plane
    n1 = decaying_sqrt(np.asarray(e1, dtype=complex))
    n2 = decaying_sqrt(np.asarray(e2, dtype=complex))
    sq21 = n2 / n1
    sq12 = n1 / n2
    r_te = (c - sq21 * root) / (c + sq21 * root)
    r_tm = (-c + sq12 * root) / (c + sq12 * root)
    return r_te, r_tm


# ---------------------------------------------------------------------------
# current induction (lit-region physical optics with local Fresnel weights)
# ---------------------------------------------------------------------------

_DEGENERATE_SIN = 1e-6


def induce_currents(
    fields: FieldSet,
    mesh: SurfaceMesh,
    eta_outer: complex,
    eps_outer: complex = 1.0 + 0.0j,
    eps_inner: complex | None = None,
    normal_sign: float = 1.0,
) -> CurrentSheet:
    """Equivalent surface currents induced by incident fields on a mesh.

    The incident propagation direction at each facet is the local Poynting
    direction; the field is decomposed into TE/TM about the plane of
    incidence and weighted by the interface Fresnel coefficients:

        J = (1/eta1) [ E_TE cos(th) (1 - R_TE) e_TE + E_TM (1 - R_TM) (n x e_TE) ]
        M = -E_TE (1 + R_TE) (n x e_TE) + E_TM cos(th) (1 + R_TM) e_TE

    which equal n x H_tot and E_tot x n for the locally reflected plane wave;
    for PEC (`eps_inner=None`) this reduces to J = 2 n x H_inc, M = 0.

    Facets whose normal does not face the incoming power (n.s >= 0) are in
    shadow and carry zero current.  `normal_sign=-1` flips the stored mesh
    normals (used for interface crossings inside the dielectric cascade).
    At normal incidence the TE/TM split is degenerate; the incident E
    polarisation serves as e_TE, and because R_TE = R_TM there the result is
    independent of that choice.
    """
    e_inc = fields.E
    h_inc = fields.H
    n_hat = normal_sign * mesh.normals
    n = e_inc.shape[0]

    poynting = np.cross(e_inc, np.conj(h_inc)).real
    smag = np.linalg.norm(poynting, axis=1)
    active = smag > 0.0
    s_hat = np.zeros((n, 3))
    s_hat[active] = poynting[active] / smag[active, None]

    cos_th = -np.einsum("ij,ij->i", s_hat, n_hat)
    lit = active & (cos_th > 0.0)
    cos_th = np.clip(cos_th, 0.0, 1.0)

    # TE unit vector: normal to the plane of incidence
    cross_sn = np.cross(s_hat, n_hat)
    sin_th = np.linalg.norm(cross_sn, axis=1)
    e_te = np.zeros((n, 3))
    regular = lit & (sin_th > _DEGENERATE_SIN)
    e_te[regular] = cross_sn[regular] / sin_th[regular, None]
    degen = lit & ~regular
    if np.any(degen):
        # use the incident E polarisation projected onto the tangent plane
        for part in (e_inc.real, e_inc.imag):
            idx = degen & (np.linalg.norm(e_te, axis=1) < 0.5)
            if not np.any(idx):
                break
            t = part[idx] - np.einsum("ij,ij->i", part[idx], n_hat[idx])[:, None] * n_hat[idx]
            tn = np.linalg.norm(t, axis=1)
            good = tn > 1e-12
            rows = np.flatnonzero(idx)[good]
            e_te[rows] = t[good] / tn[good, None]
        # anything still unset: arbitrary tangent (field is numerically tiny)
        idx = degen & (np.linalg.norm(e_te, axis=1) < 0.5)
        if np.any(idx):
            ref = np.tile(np.array([1.0, 0.0, 0.0]), (int(idx.sum()), 1))
            para = np.abs(np.einsum("ij,ij->i", ref, n_hat[idx])) > 0.9
            ref[para] = np.array([0.0, 1.0, 0.0])
            t = ref - np.einsum("ij,ij->i", ref, n_hat[idx])[:, None] * n_hat[idx]
            e_te[idx] = t / np.linalg.norm(t, axis=1)[:, None]

    e_tm = np.cross(e_te, s_hat)
    u_hat = np.cross(n_hat, e_te)

    amp_te = np.einsum("ij,ij->i", e_inc, e_te.astype(complex))
    amp_tm = np.einsum("ij,ij->i", e_inc, e_tm.astype(complex))

    r_te, r_tm = fresnel_coefficients(cos_th, eps_outer, eps_inner)

    j_cur = (1.0 / eta_outer) * (
        (amp_te * cos_th * (1.0 - r_te))[:, None] * e_te
        + (amp_tm * (1.0 - r_tm))[:, None] * u_hat
    )
    m_cur = (
        -(amp_te * (1.0 + r_te))[:, None] * u_hat
        + (amp_tm * cos_th * (1.0 + r_tm))[:, None] * e_te
    )
    j_cur[~lit] = 0.0
    m_cur[~lit] = 0.0
    return CurrentSheet(mesh=mesh, J=j_cur, M=m_cur)
