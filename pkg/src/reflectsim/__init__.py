"""Single-frequency reflectarray imaging simulator.

Physical-optics depth imaging of dielectric slabs on a conducting plate
through confocal 1-bit reflectarrays, plus an analytical ray/transmission-
line forward model with exhaustive grid-search inversion of complex
permittivity and thickness.
"""

__version__ = "0.1.0"

from .estimator import (
    BatchStatistics,
    EstimationResult,
    MeasurementSet,
    SweepGrid,
    add_noise,
    error_function,
    estimate,
    estimate_batch,
    select_focus_points,
)
from .go import GoModel, TLStack, tl_reflection, trace_rays
from .imager import PoImager, ProfileImage, ReceivedScan, reconstruct_profile
from .kernels import (
    BACKEND,
    CurrentSheet,
    FieldSet,
    Medium,
    SingularKernelError,
    decaying_sqrt,
    fresnel_coefficients,
    induce_currents,
    radiate,
    radiate_pairs,
)
from .masks import FocusGrid, PhaseMask, apply_mask, binary_phase, phase_bit
from .mesh import Facet, SurfaceMesh, mesh_rectangle
from .scene import (
    ComplexPermittivity,
    PhysicalConstants,
    Scene,
    SceneValidationError,
    build_scene,
    default_config,
    parse_config,
    serialize_config,
)

__all__ = [
    "__version__",
    "BACKEND",
    "BatchStatistics",
    "ComplexPermittivity",
    "CurrentSheet",
    "EstimationResult",
    "Facet",
    "FieldSet",
    "FocusGrid",
    "GoModel",
    "MeasurementSet",
    "Medium",
    "PhaseMask",
    "PhysicalConstants",
    "PoImager",
    "ProfileImage",
    "ReceivedScan",
    "Scene",
    "SceneValidationError",
    "SingularKernelError",
    "SurfaceMesh",
    "SweepGrid",
    "TLStack",
    "add_noise",
    "apply_mask",
    "binary_phase",
    "build_scene",
    "decaying_sqrt",
    "default_config",
    "error_function",
    "estimate",
    "estimate_batch",
    "fresnel_coefficients",
    "induce_currents",
    "mesh_rectangle",
    "parse_config",
    "phase_bit",
    "radiate",
    "radiate_pairs",
    "reconstruct_profile",
    "select_focus_points",
    "serialize_config",
    "tl_reflection",
    "trace_rays",
]
