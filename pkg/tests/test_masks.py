"""1-bit mask unit tests.

The bit rule has an exact scalar characterisation: a patch flips sign iff
the two-leg path phase has a negative cosine.  Everything here checks
against that, plus the strict open-interval boundaries the rule pins down.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from reflectsim.kernels import CurrentSheet
from reflectsim.masks import FocusGrid, PhaseMask, apply_mask, binary_phase, phase_bit
from reflectsim.mesh import mesh_rectangle

HALF_PI = 0.5 * np.pi
EPS = 1e-9


def test_bit_rule_boundaries_are_strict():
    # values in [0, 2*pi) pass through np.mod unchanged, so the exact
    # boundary points really hit the comparison
    phases = np.array([
        0.0,
        HALF_PI - EPS,
        HALF_PI,
        HALF_PI + EPS,
        np.pi,
        3 * HALF_PI - EPS,
        3 * HALF_PI,
        3 * HALF_PI + EPS,
        2 * np.pi - EPS,
    ])
    expected = np.array([0, 0, 0, 1, 1, 1, 0, 0, 0], dtype=np.uint8)
    bits = phase_bit(phases)
    assert bits.dtype == np.uint8
    np.testing.assert_array_equal(bits, expected)


def test_bit_rule_wraps_modulo_two_pi():
    assert phase_bit(2 * np.pi) == 0
    assert phase_bit(2 * np.pi + np.pi) == 1
    assert phase_bit(7 * np.pi) == 1
    assert phase_bit(8 * np.pi) == 0


def test_bit_is_one_exactly_where_cosine_is_negative():
    rng = np.random.default_rng(7)
    phases = rng.uniform(0.0, 40 * np.pi, size=10_000)
    cos = np.cos(phases)
    away_from_boundary = np.abs(cos) > 1e-12
    bits = phase_bit(phases)
    np.testing.assert_array_equal(
        bits[away_from_boundary] == 1, cos[away_from_boundary] < 0.0
    )


def test_phase_factor_and_delta_psi():
    mask = PhaseMask(
        bits=np.array([0, 1, 1, 0], dtype=np.uint8),
        focus=np.zeros(3),
        path_length=np.ones(4),
    )
    np.testing.assert_array_equal(mask.delta_psi, np.array([0.0, np.pi, np.pi, 0.0]))
    np.testing.assert_array_equal(mask.phase_factor, np.array([1.0, -1.0, -1.0, 1.0]))


def test_binary_phase_uses_feed_and_focus_legs(mini_scene):
    fara = mini_scene.faras[0]
    k0 = mini_scene.constants.k0
    focus = np.array([500.0, 920.0, 800.0])
    mask = binary_phase(fara, focus, k0)

    centers = fara.array.patch_centers
    assert mask.bits.shape == (centers.shape[0],)
    assert mask.path_length.shape == (centers.shape[0],)
    np.testing.assert_allclose(mask.focus, focus)

    # spot-check the two-leg arithmetic patch by patch
    for i in (0, 1, centers.shape[0] // 2, centers.shape[0] - 1):
        path = math.dist(centers[i], fara.feed.center) + math.dist(focus, centers[i])
        assert mask.path_length[i] == pytest.approx(path, abs=1e-9)
        cos = math.cos(k0 * path)
        assert abs(cos) > 1e-9  # none of the sampled patches sits on a boundary
        assert mask.bits[i] == (1 if cos < 0 else 0)


def test_mask_makes_every_patch_contribution_coherent(mini_scene):
    """After the sign flip the per-patch path phasors all land in the right
    half plane, which is the point of the 1-bit rule."""
    fara = mini_scene.faras[0]
    k0 = mini_scene.constants.k0
    focus = np.array([500.0, 920.0, 800.0])
    mask = binary_phase(fara, focus, k0)

    compensated = np.cos(k0 * mask.path_length) * mask.phase_factor
    assert np.all(compensated >= -1e-12)
    # the aperture spans several wavelengths of path spread, so both bit
    # values must occur
    assert 0 < int(mask.bits.sum()) < mask.bits.shape[0]


def test_masked_sum_beats_unmasked_sum(mini_scene):
    fara = mini_scene.faras[0]
    k0 = mini_scene.constants.k0
    focus = np.array([500.0, 920.0, 800.0])
    mask = binary_phase(fara, focus, k0)

    phasors = np.exp(-1j * k0 * mask.path_length)
    masked = np.sum(phasors * mask.phase_factor)
    unmasked = np.sum(phasors)
    assert abs(masked) > 2.0 * abs(unmasked)
    # real part of the masked sum is the rectified-cosine total exactly
    assert masked.real == pytest.approx(
        np.sum(np.abs(np.cos(k0 * mask.path_length))), rel=1e-9
    )


def test_masks_differ_between_foci(mini_scene):
    fara = mini_scene.faras[0]
    k0 = mini_scene.constants.k0
    near = binary_phase(fara, np.array([500.0, 920.0, 700.0]), k0)
    far = binary_phase(fara, np.array([500.0, 920.0, 900.0]), k0)
    assert np.any(near.bits != far.bits)


def test_apply_mask_flips_both_facets_of_each_patch():
    # 1 x 3 cells (hypotenuse bound): 6 facets for a 3-patch mask
    mesh = mesh_rectangle(0.7, 2.1, 1.0)
    n = len(mesh)
    assert n == 6
    rng = np.random.default_rng(3)
    J = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    M = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    mask = PhaseMask(
        bits=np.array([0, 1, 0], dtype=np.uint8),
        focus=np.zeros(3),
        path_length=np.ones(3),
    )

    out = apply_mask(CurrentSheet(mesh=mesh, J=J, M=M), mask)
    signs = np.array([1.0, 1.0, -1.0, -1.0, 1.0, 1.0])[:, None]
    np.testing.assert_array_equal(out.J, J * signs)
    np.testing.assert_array_equal(out.M, M * signs)
    assert out.mesh is mesh


def test_apply_mask_rejects_facet_count_mismatch():
    mesh = mesh_rectangle(0.7, 2.1, 1.0)
    n = len(mesh)
    sheet = CurrentSheet(
        mesh=mesh,
        J=np.zeros((n, 3), dtype=complex),
        M=np.zeros((n, 3), dtype=complex),
    )
    mask = PhaseMask(
        bits=np.zeros(4, dtype=np.uint8), focus=np.zeros(3), path_length=np.ones(4)
    )
    with pytest.raises(ValueError, match="6 facets, mask expects 8"):
        apply_mask(sheet, mask)


def test_focus_grid_axial_spacing():
    grid = FocusGrid.axial(500.0, 920.0, 600.0, 1000.0, 10.0)
    assert grid.z_mm.shape == (41,)
    assert grid.z_mm[0] == 600.0
    assert grid.z_mm[-1] == 1000.0
    np.testing.assert_allclose(np.diff(grid.z_mm), 10.0)

    pts = grid.points
    assert pts.shape == (41, 3)
    np.testing.assert_allclose(pts[:, 0], 500.0)
    np.testing.assert_allclose(pts[:, 1], 920.0)
    np.testing.assert_allclose(pts[:, 2], grid.z_mm)


def test_focus_grid_rejects_nonpositive_step():
    with pytest.raises(ValueError, match="dz_mm must be positive"):
        FocusGrid.axial(0.0, 0.0, 600.0, 1000.0, 0.0)
    with pytest.raises(ValueError, match="dz_mm must be positive"):
        FocusGrid.axial(0.0, 0.0, 600.0, 1000.0, -5.0)
