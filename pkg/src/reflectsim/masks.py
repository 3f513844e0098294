"""1-bit focusing phase masks for the reflectarray patches.

Each patch either leaves the reflected phase untouched or adds pi.  The bit
compensates the two-leg path feed -> patch -> focus so the refocused
contributions add near-coherently at the focus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import CurrentSheet
from .scene import Fara

__all__ = ["PhaseMask", "FocusGrid", "phase_bit", "binary_phase", "apply_mask"]

TWO_PI = 2.0 * np.pi


def phase_bit(path_phase: np.ndarray) -> np.ndarray:
    """Bit rule on the two-leg path phase k0*L.

    1 (add pi) iff pi/2 < mod(k0*L, 2*pi) < 3*pi/2, strict on both ends;
    0 otherwise.
    """
    wrapped = np.mod(np.asarray(path_phase, dtype=float), TWO_PI)
    return ((wrapped > 0.5 * np.pi) & (wrapped < 1.5 * np.pi)).astype(np.uint8)


@dataclass(frozen=True)
class PhaseMask:
    """Per-patch 1-bit phase states for one (feed, focus) pair."""

    bits: np.ndarray
    focus: np.ndarray
    path_length: np.ndarray

    @property
    def delta_psi(self) -> np.ndarray:
        """Phase shift per patch in radians (0 or pi)."""
        return self.bits * np.pi

    @property
    def phase_factor(self) -> np.ndarray:
        """exp(+j*delta_psi) per patch, exactly +-1."""
        return np.where(self.bits == 1, -1.0, 1.0)


def binary_phase(fara: Fara, focus: np.ndarray, k0: float) -> PhaseMask:
    """Mask focusing `fara` at `focus` by the two-leg path rule."""
    focus = np.asarray(focus, dtype=float)
    centers = fara.array.patch_centers
    leg_feed = np.linalg.norm(centers - fara.feed.center[None, :], axis=1)
    leg_focus = np.linalg.norm(focus[None, :] - centers, axis=1)
    path = leg_feed + leg_focus
    return PhaseMask(bits=phase_bit(k0 * path), focus=focus, path_length=path)


def apply_mask(sheet: CurrentSheet, mask: PhaseMask) -> CurrentSheet:
    """Apply per-patch phase states to patch facet currents.

    The sheet must be the patch mesh of the mask's array: facets 2*i and
    2*i + 1 belong to patch i.
    """
    n_patches = mask.bits.shape[0]
    if sheet.J.shape[0] != 2 * n_patches:
        raise ValueError(
            f"sheet has {sheet.J.shape[0]} facets, mask expects {2 * n_patches}"
        )
    factor = np.repeat(mask.phase_factor, 2)[:, None]
    return CurrentSheet(mesh=sheet.mesh, J=sheet.J * factor, M=sheet.M * factor)


@dataclass(frozen=True)
class FocusGrid:
    """Axial scan positions under a common transverse centre."""

    x_mm: float
    y_mm: float
    z_mm: np.ndarray

    @classmethod
    def axial(cls, x_mm: float, y_mm: float, z_min: float, z_max: float,
              dz_mm: float) -> "FocusGrid":
        if dz_mm <= 0:
            raise ValueError("dz_mm must be positive")
        n = int(round((z_max - z_min) / dz_mm))
        z = z_min + dz_mm * np.arange(n + 1)
        return cls(x_mm=x_mm, y_mm=y_mm, z_mm=z)

    @property
    def points(self) -> np.ndarray:
        pts = np.empty((self.z_mm.shape[0], 3))
        pts[:, 0] = self.x_mm
        pts[:, 1] = self.y_mm
        pts[:, 2] = self.z_mm
        return pts
