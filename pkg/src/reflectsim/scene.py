"""Scene description: constants, geometry, config parsing and mesh assembly.

A scene couples one or more focusing reflectarray apertures (each fed by a
horn) with a PEC backing plate and an optional dielectric slab mounted on the
plate.  Everything is derived from a plain JSON-serialisable config dict so a
scene can be hashed, written to disk and rebuilt byte-identically.

Units: millimetres, GHz, radians.  Time convention e^{+j omega t}; a lossy
relative permittivity is eps' - j*eps''.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import SurfaceMesh, mesh_rectangle

logger = logging.getLogger(__name__)

__all__ = [
    "SceneValidationError",
    "PhysicalConstants",
    "ComplexPermittivity",
    "HornFeed",
    "Reflectarray",
    "DielectricSlab",
    "Plate",
    "Fara",
    "Scene",
    "TARGET_PRESETS",
    "default_config",
    "parse_config",
    "serialize_config",
    "scene_hash",
    "build_scene",
]

# ---------------------------------------------------------------------------
# physical constants
# ---------------------------------------------------------------------------

SPEED_OF_LIGHT_MM_PER_NS = 299.792458
FREE_SPACE_IMPEDANCE_OHM = 376.730313668

# default operating frequency (GHz) and mesh density (fraction of lambda0)
DEFAULT_FREQUENCY_GHZ = 24.16
DEFAULT_EDGE_FRACTION = 1.0 / 5.0


class SceneValidationError(ValueError):
    """Raised when a scene config is structurally or physically invalid."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Frequency-derived scalars shared by every module.

    Attributes
    ----------
    f0_ghz : float
        Operating frequency in GHz (single-frequency system).
    k0 : float
        Free-space wavenumber in rad/mm.
    lambda0 : float
        Free-space wavelength in mm.
    eta0 : float
        Free-space wave impedance in ohm.
    """

    f0_ghz: float
    k0: float
    lambda0: float
    eta0: float = FREE_SPACE_IMPEDANCE_OHM

    @classmethod
    def from_frequency(cls, f0_ghz: float) -> "PhysicalConstants":
        if f0_ghz <= 0.0:
            raise SceneValidationError("frequency_ghz must be positive")
        lambda0 = SPEED_OF_LIGHT_MM_PER_NS / f0_ghz
        return cls(f0_ghz=f0_ghz, k0=2.0 * math.pi / lambda0, lambda0=lambda0)


@dataclass(frozen=True)
class ComplexPermittivity:
    """Relative permittivity eps' - j*eps'' (eps'' >= 0 means loss)."""

    eps_real: float
    eps_imag: float = 0.0

    def __post_init__(self) -> None:
        if self.eps_real <= 0.0:
            raise SceneValidationError("eps_real must be positive")
        if self.eps_imag < 0.0:
            raise SceneValidationError("eps_imag must be non-negative")

    @property
    def value(self) -> complex:
        return complex(self.eps_real, -self.eps_imag)


# ---------------------------------------------------------------------------
# geometry elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HornFeed:
    """Horn feed modelled by its rectangular mouth.

    The mouth carries a uniform y-polarised equivalent electric current of
    unit amplitude; absolute drive level cancels in every calibrated ratio.

    Attributes
    ----------
    center : (3,) array
        Aperture centre position.
    boresight : (3,) array
        Unit vector from the aperture centre towards the array centre.
    width_mm, height_mm : float
        Mouth dimensions; the height axis is the polarisation axis.
    polarization : (3,) array
        Unit polarisation vector (global +y projected off the boresight).
    mesh : SurfaceMesh
        Mouth mesh in world coordinates; facet normals along the boresight.
    """

    center: np.ndarray
    boresight: np.ndarray
    width_mm: float
    height_mm: float
    polarization: np.ndarray
    mesh: SurfaceMesh

    @property
    def aperture_area(self) -> float:
        return self.mesh.total_area


@dataclass(frozen=True)
class Reflectarray:
    """Square grid of 1-bit PEC patches in the z = 0 plane.

    Attributes
    ----------
    center : (3,) array
        Array centre.
    side_mm, pitch_mm : float
        Aperture side length and patch pitch; m_side = floor(side/pitch).
    patch_centers : (M, 3) array
        Patch centres, row-major over (iy, ix).
    mesh : SurfaceMesh
        Two triangles per patch; facets 2*i and 2*i + 1 belong to patch i.
        Normals are +z (towards the region of interest).
    """

    center: np.ndarray
    side_mm: float
    pitch_mm: float
    m_side: int
    patch_centers: np.ndarray
    mesh: SurfaceMesh

    @property
    def n_patches(self) -> int:
        return self.patch_centers.shape[0]

    def patch_facets(self, i: int) -> tuple[int, int]:
        return 2 * i, 2 * i + 1


@dataclass(frozen=True)
class Fara:
    """Focusing reflectarray aperture: one feed + one patch array."""

    feed: HornFeed
    array: Reflectarray


@dataclass(frozen=True)
class Plate:
    """PEC backing plate at z = z_bg, facing the arrays (normal -z)."""

    z_bg_mm: float
    extent_mm: tuple[float, float]
    center_mm: tuple[float, float]


@dataclass(frozen=True)
class DielectricSlab:
    """Homogeneous dielectric slab mounted on the plate.

    The slab back face sits on the plate plane z = z_bg; the front face is at
    z = z_bg - thickness.  `center` is the back-face centre [x, y, z_bg].
    """

    center: np.ndarray
    extent_mm: tuple[float, float]
    thickness_mm: float
    eps: ComplexPermittivity

    @property
    def front_z(self) -> float:
        return float(self.center[2]) - self.thickness_mm


@dataclass(frozen=True)
class Scene:
    """Immutable, fully meshed scene.

    Meshed surfaces (all normals on the air side, -z for horizontal panels):

    - per fara: horn-mouth mesh and patch mesh;
    - `body_mesh`: exposed plate (footprint under the slab excluded);
    - `obj_mesh` / `bot_mesh`: slab front face and PEC-backed bottom face
      (present only when a target is defined).
    """

    constants: PhysicalConstants
    faras: tuple[Fara, ...]
    plate: Plate | None
    target: DielectricSlab | None
    body_mesh: SurfaceMesh | None
    obj_mesh: SurfaceMesh | None
    bot_mesh: SurfaceMesh | None
    max_edge_mm: float
    config: dict = field(repr=False)

    @property
    def hash(self) -> str:
        return scene_hash(self.config)

    def without_target(self) -> "Scene":
        """The same scene with the slab removed (calibration runs)."""
        cfg = json.loads(serialize_config(self.config))
        cfg["target"] = None
        return build_scene(cfg)


# slab presets used by the synthetic-measurement pipeline:
# eps_real, eps_imag, thickness_mm, air gap (GO stack only)
TARGET_PRESETS: dict[str, tuple[float, float, float, float]] = {
    "object1": (8.0, 0.0, 20.0, 0.0),
    "object2": (2.0, 0.0, 40.0, 0.0),
    "object3": (4.0, 0.2, 40.0, 0.0),
    "pa66": (3.0, 0.01, 37.0, 1.0),
}


# ---------------------------------------------------------------------------
# config dictionaries
# ---------------------------------------------------------------------------


def default_config(scale: str = "reduced", target: str | None = None) -> dict:
    """Reference two-array config; `scale` picks the aperture side.

    ``"full"`` is the 1000 mm array layout; ``"reduced"`` is the desk-scale
    250 mm variant with identical feed/plate geometry.  `target` may name a
    preset slab (``"object1"`` .. ``"object3"``, ``"pa66"``) or be None for a
    bare plate.
    """
    if scale == "full":
        side = 1000.0
    elif scale == "reduced":
        side = 250.0
    else:
        raise SceneValidationError(f"unknown scale {scale!r} (use 'full' or 'reduced')")
    constants = PhysicalConstants.from_frequency(DEFAULT_FREQUENCY_GHZ)
    pitch = constants.lambda0 / 2.0
    cfg: dict = {
        "frequency_ghz": DEFAULT_FREQUENCY_GHZ,
        "faras": [
            {
                "feed_center": [1313.0, 1413.0, 830.0],
                "aperture_mm": [22.0, 17.0],
                "array_center": [500.0, 1413.0, 0.0],
                "side_mm": side,
                "pitch_mm": pitch,
            },
            {
                "feed_center": [1313.0, 461.0, 830.0],
                "aperture_mm": [22.0, 17.0],
                "array_center": [500.0, 461.0, 0.0],
                "side_mm": side,
                "pitch_mm": pitch,
            },
        ],
        "plate": {
            "z_bg_mm": 800.0,
            "extent_mm": [600.0, 500.0],
            "center_mm": [500.0, 920.0],
        },
        "target": None,
        "mesh": {"max_edge_mm": constants.lambda0 * DEFAULT_EDGE_FRACTION},
    }
    if target is not None:
        if target not in TARGET_PRESETS:
            raise SceneValidationError(
                f"unknown target preset {target!r}; choose from {sorted(TARGET_PRESETS)}"
            )
        er, ei, t_mm, _gap = TARGET_PRESETS[target]
        cfg["target"] = {
            "center": [500.0, 920.0, 800.0],
            "extent_mm": [200.0, 150.0],
            "thickness_mm": t_mm,
            "eps_real": er,
            "eps_imag": ei,
        }
    return cfg


def serialize_config(config: dict) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(config, sort_keys=True, indent=2) + "\n"


def parse_config(text: str) -> dict:
    """Parse config JSON text and validate it; returns the config dict."""
    config = json.loads(text)
    _validate_config(config)
    return config


def scene_hash(config: dict) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise SceneValidationError(message)


def _as_vec(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    _require(arr.shape == (n,), f"{name} must be a {n}-vector")
    _require(bool(np.all(np.isfinite(arr))), f"{name} must be finite")
    return arr


def _validate_config(config: dict) -> None:
    _require(isinstance(config, dict), "config must be a JSON object")
    for key in ("frequency_ghz", "faras", "plate", "mesh"):
        _require(key in config, f"config missing required key {key!r}")
    _require(
        isinstance(config["frequency_ghz"], (int, float)) and config["frequency_ghz"] > 0,
        "frequency_ghz must be a positive number",
    )
    faras = config["faras"]
    _require(isinstance(faras, list) and len(faras) >= 1, "faras must be a non-empty list")
    for i, f in enumerate(faras):
        name = f"faras[{i}]"
        _require(isinstance(f, dict), f"{name} must be an object")
        for key in ("feed_center", "aperture_mm", "array_center", "side_mm", "pitch_mm"):
            _require(key in f, f"{name} missing key {key!r}")
        feed = _as_vec(f["feed_center"], 3, f"{name}.feed_center")
        center = _as_vec(f["array_center"], 3, f"{name}.array_center")
        ap = _as_vec(f["aperture_mm"], 2, f"{name}.aperture_mm")
        _require(bool(np.all(ap > 0)), f"{name}.aperture_mm must be positive")
        _require(f["pitch_mm"] > 0, f"{name}.pitch_mm must be positive")
        _require(f["side_mm"] >= f["pitch_mm"], f"{name}.side_mm must be >= pitch_mm")
        _require(
            float(np.linalg.norm(feed - center)) > 1e-6,
            f"{name} feed must be separated from the array centre",
        )
    plate = config["plate"]
    if plate is not None:
        _require(isinstance(plate, dict), "plate must be an object or null")
        for key in ("z_bg_mm", "extent_mm"):
            _require(key in plate, f"plate missing key {key!r}")
        ext = _as_vec(plate["extent_mm"], 2, "plate.extent_mm")
        _require(bool(np.all(ext > 0)), "plate.extent_mm must be positive")
        if "center_mm" in plate and plate["center_mm"] is not None:
            _as_vec(plate["center_mm"], 2, "plate.center_mm")
    target = config.get("target")
    if target is not None:
        _require(plate is not None, "a target requires a plate")
        _require(isinstance(target, dict), "target must be an object or null")
        for key in ("center", "extent_mm", "thickness_mm", "eps_real", "eps_imag"):
            _require(key in target, f"target missing key {key!r}")
        tc = _as_vec(target["center"], 3, "target.center")
        text = _as_vec(target["extent_mm"], 2, "target.extent_mm")
        _require(bool(np.all(text > 0)), "target.extent_mm must be positive")
        _require(target["thickness_mm"] > 0, "target.thickness_mm must be positive")
        ComplexPermittivity(target["eps_real"], target["eps_imag"])
        _require(
            abs(tc[2] - plate["z_bg_mm"]) < 1e-9,
            "target.center z must equal plate.z_bg_mm (slab mounted on the plate)",
        )
        pc = np.asarray(
            plate.get("center_mm") if plate.get("center_mm") is not None else tc[:2],
            dtype=float,
        )
        pext = np.asarray(plate["extent_mm"], dtype=float)
        _require(
            bool(np.all(np.abs(tc[:2] - pc) + text / 2.0 <= pext / 2.0 + 1e-9)),
            "target footprint must lie within the plate extent",
        )
    mesh_cfg = config["mesh"]
    _require(isinstance(mesh_cfg, dict) and "max_edge_mm" in mesh_cfg, "mesh.max_edge_mm required")
    _require(mesh_cfg["max_edge_mm"] > 0, "mesh.max_edge_mm must be positive")


# ---------------------------------------------------------------------------
# scene assembly
# ---------------------------------------------------------------------------


def _build_horn(f: dict, max_edge: float) -> HornFeed:
    center = np.asarray(f["feed_center"], dtype=float)
    array_center = np.asarray(f["array_center"], dtype=float)
    boresight = array_center - center
    boresight = boresight / np.linalg.norm(boresight)
    y = np.array([0.0, 1.0, 0.0])
    pol = y - np.dot(y, boresight) * boresight
    nrm = np.linalg.norm(pol)
    if nrm < 1e-9:
        raise SceneValidationError("feed boresight parallel to y: polarisation undefined")
    pol = pol / nrm
    w_axis = np.cross(pol, boresight)
    w_mm, h_mm = float(f["aperture_mm"][0]), float(f["aperture_mm"][1])
    local = mesh_rectangle(w_mm, h_mm, max_edge)
    rot = np.column_stack([w_axis, pol, boresight])
    return HornFeed(
        center=center,
        boresight=boresight,
        width_mm=w_mm,
        height_mm=h_mm,
        polarization=pol,
        mesh=local.transformed(rotation=rot, translation=center),
    )


def _build_array(f: dict) -> Reflectarray:
    center = np.asarray(f["array_center"], dtype=float)
    side = float(f["side_mm"])
    pitch = float(f["pitch_mm"])
    m_side = int(math.floor(side / pitch))
    offsets = (np.arange(m_side) - (m_side - 1) / 2.0) * pitch
    gy, gx = np.meshgrid(offsets, offsets, indexing="ij")  # row-major over (iy, ix)
    centers = np.stack(
        [center[0] + gx.ravel(), center[1] + gy.ravel(), np.full(m_side * m_side, center[2])],
        axis=1,
    )
    # two triangles per patch, +z normals, consistent winding
    h = pitch / 2.0
    c00 = centers + np.array([-h, -h, 0.0])
    c10 = centers + np.array([h, -h, 0.0])
    c01 = centers + np.array([-h, h, 0.0])
    c11 = centers + np.array([h, h, 0.0])
    lower = np.stack([c00, c10, c11], axis=1)
    upper = np.stack([c00, c11, c01], axis=1)
    verts = np.empty((2 * centers.shape[0], 3, 3))
    verts[0::2] = lower
    verts[1::2] = upper
    return Reflectarray(
        center=center,
        side_mm=side,
        pitch_mm=pitch,
        m_side=m_side,
        patch_centers=centers,
        mesh=SurfaceMesh(verts),
    )


_FLIP_DOWN = np.diag([1.0, -1.0, -1.0])  # +z normal -> -z normal


def _horizontal_panel(width: float, height: float, cx: float, cy: float, z: float,
                      max_edge: float) -> SurfaceMesh:
    """Rectangle in the z = `z` plane with -z normals (facing the arrays)."""
    local = mesh_rectangle(width, height, max_edge)
    return local.transformed(rotation=_FLIP_DOWN, translation=np.array([cx, cy, z]))


def _build_body_mesh(plate: Plate, target: DielectricSlab | None,
                     max_edge: float) -> SurfaceMesh:
    px, py = plate.center_mm
    pw, ph = plate.extent_mm
    if target is None:
        return _horizontal_panel(pw, ph, px, py, plate.z_bg_mm, max_edge)
    # exposed plate = plate minus slab footprint, decomposed into four strips
    tx, ty = float(target.center[0]), float(target.center[1])
    tw, th = target.extent_mm
    x0, x1 = px - pw / 2.0, px + pw / 2.0
    y0, y1 = py - ph / 2.0, py + ph / 2.0
    a0, a1 = tx - tw / 2.0, tx + tw / 2.0
    b0, b1 = ty - th / 2.0, ty + th / 2.0
    strips = []
    if a0 - x0 > 1e-9:
        strips.append(((x0 + a0) / 2.0, py, a0 - x0, ph))
    if x1 - a1 > 1e-9:
        strips.append(((a1 + x1) / 2.0, py, x1 - a1, ph))
    if b0 - y0 > 1e-9:
        strips.append((tx, (y0 + b0) / 2.0, a1 - a0, b0 - y0))
    if y1 - b1 > 1e-9:
        strips.append((tx, (b1 + y1) / 2.0, a1 - a0, y1 - b1))
    if not strips:
        raise SceneValidationError("slab covers the whole plate: no exposed body surface")
    meshes = [
        _horizontal_panel(w, h, cx, cy, plate.z_bg_mm, max_edge) for cx, cy, w, h in strips
    ]
    return SurfaceMesh.concat(meshes)


def build_scene(config: dict) -> Scene:
    """Validate `config` and assemble the fully meshed immutable scene."""
    _validate_config(config)
    constants = PhysicalConstants.from_frequency(float(config["frequency_ghz"]))
    max_edge = float(config["mesh"]["max_edge_mm"])

    faras = tuple(
        Fara(feed=_build_horn(f, max_edge), array=_build_array(f)) for f in config["faras"]
    )

    plate_cfg = config["plate"]
    plate = None
    target = None
    body_mesh = obj_mesh = bot_mesh = None
    if plate_cfg is not None:
        target_cfg = config.get("target")
        if target_cfg is not None:
            target = DielectricSlab(
                center=np.asarray(target_cfg["center"], dtype=float),
                extent_mm=(float(target_cfg["extent_mm"][0]), float(target_cfg["extent_mm"][1])),
                thickness_mm=float(target_cfg["thickness_mm"]),
                eps=ComplexPermittivity(
                    float(target_cfg["eps_real"]), float(target_cfg["eps_imag"])
                ),
            )
        center_mm = plate_cfg.get("center_mm")
        if center_mm is None:
            if target is not None:
                center_mm = (float(target.center[0]), float(target.center[1]))
            else:
                centers = np.array([f["array_center"] for f in config["faras"]], dtype=float)
                center_mm = (float(centers[:, 0].mean()), float(centers[:, 1].mean()))
        plate = Plate(
            z_bg_mm=float(plate_cfg["z_bg_mm"]),
            extent_mm=(float(plate_cfg["extent_mm"][0]), float(plate_cfg["extent_mm"][1])),
            center_mm=(float(center_mm[0]), float(center_mm[1])),
        )
        body_mesh = _build_body_mesh(plate, target, max_edge)
        if target is not None:
            tw, th = target.extent_mm
            tx, ty = float(target.center[0]), float(target.center[1])
            # the slab interior shortens the wavelength by Re(sqrt(eps)); the
            # front face and the covered plate exchange in-medium fields, so
            # their facets must resolve that wavelength or the bounce series
            # between them does not converge.  mesh_rectangle bounds the
            # hypotenuse, so this cap puts the triangle legs at half the
            # in-medium wavelength.
            n_med = complex(np.sqrt(complex(target.eps.value))).real
            target_edge = min(
                max_edge, constants.lambda0 / (np.sqrt(2.0) * max(n_med, 1.0))
            )
            obj_mesh = _horizontal_panel(tw, th, tx, ty, target.front_z, target_edge)
            bot_mesh = _horizontal_panel(
                tw, th, tx, ty, float(target.center[2]), target_edge
            )

    scene = Scene(
        constants=constants,
        faras=faras,
        plate=plate,
        target=target,
        body_mesh=body_mesh,
        obj_mesh=obj_mesh,
        bot_mesh=bot_mesh,
        max_edge_mm=max_edge,
        config=config,
    )
    logger.debug(
        "built scene: %d fara(s), %s patches each, target=%s",
        len(faras),
        "/".join(str(f.array.n_patches) for f in faras),
        "none" if target is None else f"{target.eps.value}@{target.thickness_mm}mm",
    )
    return scene
