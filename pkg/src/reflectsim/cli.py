"""Batch command-line front end.

Subcommands: psf, image, predict, estimate, calibrate.  Every run writes
its artifacts plus one manifest into the output directory.  Exit codes:
0 success, 1 validation error, 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .estimator import (
    MeasurementSet,
    SweepGrid,
    add_noise,
    estimate,
    select_focus_points,
)
from .go import GoModel
from .imager import PoImager, reconstruct_profile
from .io_utils import (
    MeasurementFormatError,
    read_measurements_csv,
    write_error_surface_csv,
    write_manifest,
    write_measurements_csv,
    write_result_json,
    write_rows,
)
from .kernels import SingularKernelError
from .scene import (
    TARGET_PRESETS,
    Scene,
    SceneValidationError,
    build_scene,
    default_config,
    parse_config,
    scene_hash,
    serialize_config,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


def _default_workers() -> int:
    env = os.environ.get("REFLECTSIM_WORKERS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise SceneValidationError(
                f"REFLECTSIM_WORKERS must be an integer, got {env!r}"
            ) from None
    return os.cpu_count() or 1


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None,
                        help="scene config JSON (default: built-in reference scene)")
    parser.add_argument("--out", type=str, default="reflectsim_out",
                        help="output directory (created if missing)")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker threads for the radiation kernels "
                             "(default: REFLECTSIM_WORKERS or machine parallelism)")
    parser.add_argument("--seed", type=int, default=0,
                        help="random seed for synthetic noise")
    parser.add_argument("--scale", choices=["full", "reduced", "config"],
                        default="reduced",
                        help="array aperture: full 1000 mm, reduced 250 mm, "
                             "or 'config' to keep the config file's value")
    parser.add_argument("--target", type=str, default=None,
                        choices=sorted(TARGET_PRESETS) + ["none"],
                        help="override the scene target with a preset slab")


def _load_config(args) -> tuple[dict, dict]:
    """Resolved config plus the overrides actually applied."""
    overrides: dict = {}
    if args.config is None:
        scale = "reduced" if args.scale == "config" else args.scale
        cfg = default_config(scale=scale)
        overrides["scale"] = scale
    else:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        if args.scale != "config":
            side = 1000.0 if args.scale == "full" else 250.0
            for f in cfg["faras"]:
                f["side_mm"] = side
            overrides["scale"] = args.scale
    if args.target is not None:
        if args.target == "none":
            cfg["target"] = None
        else:
            er, ei, t_mm, _gap = TARGET_PRESETS[args.target]
            cfg["target"] = {
                "center": [cfg["plate"]["center_mm"][0],
                           cfg["plate"]["center_mm"][1],
                           cfg["plate"]["z_bg_mm"]],
                "extent_mm": [200.0, 150.0],
                "thickness_mm": t_mm,
                "eps_real": er,
                "eps_imag": ei,
            }
        overrides["target"] = args.target
    cfg = parse_config(serialize_config(cfg))  # re-validate after overrides
    return cfg, overrides


def _check_roi(scene: Scene, focus: np.ndarray) -> None:
    """Focus must stay inside the region of interest: the plate footprint
    grown by 25% transversely, 0 < z <= 2*z_bg."""
    plate = scene.plate
    if plate is None:
        raise SceneValidationError("scene has no plate: no region of interest")
    cx, cy = plate.center_mm
    hx, hy = plate.extent_mm[0] * 0.625, plate.extent_mm[1] * 0.625
    z_hi = 2.0 * plate.z_bg_mm
    if not (cx - hx <= focus[0] <= cx + hx):
        raise SceneValidationError(
            f"focus x_mm={focus[0]:g} outside RoI x range [{cx - hx:g}, {cx + hx:g}]"
        )
    if not (cy - hy <= focus[1] <= cy + hy):
        raise SceneValidationError(
            f"focus y_mm={focus[1]:g} outside RoI y range [{cy - hy:g}, {cy + hy:g}]"
        )
    if not (0.0 < focus[2] <= z_hi):
        raise SceneValidationError(
            f"focus z_mm={focus[2]:g} outside RoI z range (0, {z_hi:g}]"
        )


def _parse_vec3(text: str, name: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise SceneValidationError(f"{name} must be 'x,y,z', got {text!r}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise SceneValidationError(f"{name} must be numeric 'x,y,z', got {text!r}") from None


def _parse_grid(text: str | None) -> SweepGrid:
    if text is None:
        return SweepGrid.default()
    try:
        axes = []
        for part in text.split(","):
            lo, hi, step = (float(v) for v in part.split(":"))
            axes.append((lo, hi, step))
        if len(axes) != 3:
            raise ValueError("need three axes")
        return SweepGrid.from_ranges(*axes)
    except ValueError as exc:
        raise SceneValidationError(
            f"--grid must be 'er_lo:er_hi:er_step,ei_lo:ei_hi:ei_step,"
            f"t_lo:t_hi:t_step', got {text!r} ({exc})"
        ) from None


def _scene_center_xy(scene: Scene) -> tuple[float, float]:
    if scene.target is not None:
        return float(scene.target.center[0]), float(scene.target.center[1])
    return float(scene.plate.center_mm[0]), float(scene.plate.center_mm[1])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_psf(args) -> int:
    cfg, overrides = _load_config(args)
    scene = build_scene(cfg)
    workers = args.workers or _default_workers()
    if args.focus is not None:
        focus = _parse_vec3(args.focus, "--focus")
    else:
        cx, cy = _scene_center_xy(scene)
        z = scene.target.front_z if scene.target is not None else scene.plate.z_bg_mm
        focus = np.array([cx, cy, z])
    _check_roi(scene, focus)
    # the PSF is the focused illumination of the masked arrays: no target
    imager = PoImager(build_scene({**cfg, "target": None}), workers=workers)
    offs = np.arange(-args.span_mm, args.span_mm + args.step_mm / 2, args.step_mm)
    cuts = ["x", "y", "z"] if args.cut == "all" else [args.cut]
    rows = []
    for axis in cuts:
        pts = np.tile(focus, (offs.size, 1))
        pts[:, "xyz".index(axis)] += offs
        mags = imager.psf_magnitude(focus, pts)
        rows.extend([p[0], p[1], p[2], m] for p, m in zip(pts, mags))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "psf.csv", ["x_mm", "y_mm", "z_mm", "magnitude"], rows)
    overrides.update({"focus": list(map(float, focus)), "span_mm": args.span_mm,
                      "step_mm": args.step_mm, "cut": args.cut, "workers": workers})
    write_manifest(out, "psf", args.config, scene_hash(cfg), overrides,
                   ["psf.csv"], __version__)
    return EXIT_OK


def cmd_image(args) -> int:
    cfg, overrides = _load_config(args)
    scene = build_scene(cfg)
    workers = args.workers or _default_workers()
    cx, cy = _scene_center_xy(scene)
    xs = np.array([float(v) for v in args.x_mm.split(",")]) if args.x_mm else np.array([cx])
    ys = np.array([float(v) for v in args.y_mm.split(",")]) if args.y_mm else np.array([cy])
    z_lo = args.z_min_mm if args.z_min_mm is not None else scene.plate.z_bg_mm - 200.0
    z_hi = args.z_max_mm if args.z_max_mm is not None else scene.plate.z_bg_mm + 200.0
    if z_hi < z_lo or args.dz_mm <= 0:
        raise SceneValidationError("need z_max >= z_min and --dz-mm > 0")
    zs = z_lo + args.dz_mm * np.arange(int(round((z_hi - z_lo) / args.dz_mm)) + 1)
    for x in xs:
        for y in ys:
            _check_roi(scene, np.array([x, y, zs[0]]))
            _check_roi(scene, np.array([x, y, zs[-1]]))
    imager = PoImager(scene, k_order=args.k_order, workers=workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profile_rows = []
    scan_rows = []
    for y in ys:
        for x in xs:
            foci = np.column_stack([np.full(zs.size, x), np.full(zs.size, y), zs])
            scan = imager.scan(foci)
            mag = np.abs(scan.primary)
            best = int(np.argmax(mag))
            profile_rows.append([x, y, zs[best], mag[best]])
            scan_rows.extend(
                [x, y, z, v.real, v.imag] for z, v in zip(zs, scan.primary)
            )
    write_rows(out / "profile.csv",
               ["x_mm", "y_mm", "z_imaging_mm", "peak_magnitude"], profile_rows)
    write_rows(out / "scans.csv", ["x_mm", "y_mm", "z_mm", "re", "im"], scan_rows)
    overrides.update({"k_order": args.k_order, "dz_mm": args.dz_mm,
                      "z_range_mm": [float(zs[0]), float(zs[-1])], "workers": workers})
    write_manifest(out, "image", args.config, scene_hash(cfg), overrides,
                   ["profile.csv", "scans.csv"], __version__)
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg, overrides = _load_config(args)
    scene = build_scene(cfg)
    model = GoModel(scene, spreading=args.spreading)
    cx, cy = _scene_center_xy(scene)
    if args.focus_xy is not None:
        parts = args.focus_xy.split(",")
        if len(parts) != 2:
            raise SceneValidationError(f"--focus-xy must be 'x,y', got {args.focus_xy!r}")
        cx, cy = float(parts[0]), float(parts[1])
    z_lo = args.z_min_mm if args.z_min_mm is not None else scene.plate.z_bg_mm - 200.0
    z_hi = args.z_max_mm if args.z_max_mm is not None else scene.plate.z_bg_mm + 200.0
    if z_hi < z_lo or args.dz_mm <= 0:
        raise SceneValidationError("need z_max >= z_min and --dz-mm > 0")
    zs = z_lo + args.dz_mm * np.arange(int(round((z_hi - z_lo) / args.dz_mm)) + 1)
    eps = complex(args.eps_real, -args.eps_imag)
    rows = []
    for z in zs:
        focus = np.array([cx, cy, z])
        _check_roi(scene, focus)
        val = model.predict(focus, eps, args.thickness_mm, args.gap_mm)
        rows.append([z, val.real, val.imag, abs(val), float(np.degrees(np.angle(val)))])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "trace.csv",
               ["focus_z_mm", "re", "im", "magnitude", "phase_deg"], rows)
    overrides.update({"eps_real": args.eps_real, "eps_imag": args.eps_imag,
                      "thickness_mm": args.thickness_mm, "gap_mm": args.gap_mm,
                      "spreading": args.spreading,
                      "focus_xy": [cx, cy], "z_range_mm": [float(zs[0]), float(zs[-1])]})
    write_manifest(out, "predict", args.config, scene_hash(cfg), overrides,
                   ["trace.csv"], __version__)
    return EXIT_OK


def _synthetic_measurements(args, cfg: dict, scene: Scene, workers: int):
    """MeasurementSet for a preset target, generated by the imaging chain
    (or by the forward model itself when the preset carries an air gap,
    which the two-surface imaging chain cannot represent)."""
    er, ei, t_mm, gap = TARGET_PRESETS[args.synthetic]
    cx, cy = _scene_center_xy(scene)
    cal_point = np.array([cx, cy, scene.plate.z_bg_mm])
    if gap > 0:
        model = GoModel(scene)
        z_c = scene.plate.z_bg_mm - gap - t_mm
        foci = select_focus_points(np.array([cx, cy, z_c]), n=3, dz_mm=args.dz_mm)
        values = np.array(
            [model.predict(f, complex(er, -ei), t_mm, gap) for f in foci]
        )
        cal_value = model.calibration(xy=np.array([cx, cy]))
    else:
        imager = PoImager(scene, k_order=args.k_order, workers=workers)
        z_lo, z_hi = scene.plate.z_bg_mm - 200.0, scene.plate.z_bg_mm + 200.0
        zs = z_lo + args.dz_mm * np.arange(int(round((z_hi - z_lo) / args.dz_mm)) + 1)
        scan = imager.scan(
            np.column_stack([np.full(zs.size, cx), np.full(zs.size, cy), zs])
        )
        z_c = zs[int(np.argmax(np.abs(scan.primary)))]
        foci = select_focus_points(np.array([cx, cy, z_c]), n=3, dz_mm=args.dz_mm)
        values = np.empty(3, dtype=complex)
        for i, f in enumerate(foci):
            match = np.nonzero(np.abs(zs - f[2]) < 1e-9)[0]
            if match.size:
                values[i] = scan.primary[match[0]]
            else:
                values[i] = imager.scan(f[None, :]).primary[0]
        cal_imager = PoImager(scene.without_target(), k_order=1, workers=workers)
        cal_value = cal_imager.scan(cal_point[None, :]).primary[0]
    if args.noise_snr_db is not None:
        rng = np.random.default_rng(args.seed)
        values = add_noise(values, args.noise_snr_db, rng)
    return MeasurementSet(points=foci, values=values, cal_point=cal_point,
                          cal_value=cal_value), gap


def cmd_estimate(args) -> int:
    if (args.measurements is None) == (args.synthetic is None):
        raise SceneValidationError(
            "provide exactly one of a measurements file or --synthetic <preset>"
        )
    if args.synthetic is not None:
        args.target = args.synthetic  # the scene must contain the preset slab
    cfg, overrides = _load_config(args)
    scene = build_scene(cfg)
    workers = args.workers or _default_workers()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = ["result.json", "error_surface.csv"]
    gap = args.gap_mm
    if args.synthetic is not None:
        meas, gap = _synthetic_measurements(args, cfg, scene, workers)
        write_measurements_csv(out / "measurements.csv", meas)
        outputs.append("measurements.csv")
    else:
        meas = read_measurements_csv(args.measurements)
    grid = _parse_grid(args.grid)
    model = GoModel(scene, spreading=args.spreading)
    result = estimate(model, meas, grid, gap_mm=gap)
    write_result_json(out / "result.json", result)
    write_error_surface_csv(out / "error_surface.csv", result)
    overrides.update({
        "measurements": args.measurements, "synthetic": args.synthetic,
        "noise_snr_db": args.noise_snr_db, "seed": args.seed,
        "gap_mm": gap, "k_order": args.k_order, "dz_mm": args.dz_mm,
        "spreading": args.spreading, "workers": workers,
    })
    write_manifest(out, "estimate", args.config, scene_hash(cfg), overrides,
                   outputs, __version__)
    print(
        f"estimate: eps_real={result.eps_real:g} eps_imag={result.eps_imag:g} "
        f"thickness_mm={result.thickness_mm:g} (min_error={result.min_error:.6g})"
    )
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg, overrides = _load_config(args)
    scene = build_scene(cfg).without_target()
    workers = args.workers or _default_workers()
    cx, cy = float(scene.plate.center_mm[0]), float(scene.plate.center_mm[1])
    cal_point = np.array([cx, cy, scene.plate.z_bg_mm])
    imager = PoImager(scene, k_order=1, workers=workers)
    cal_value = imager.scan(cal_point[None, :]).primary[0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(
        out / "calibration.csv",
        ["x_mm", "y_mm", "z_mm", "re", "im"],
        [[cal_point[0], cal_point[1], cal_point[2],
          cal_value.real, cal_value.imag, "cal"]],
    )
    overrides.update({"workers": workers})
    write_manifest(out, "calibrate", args.config, scene_hash(cfg), overrides,
                   ["calibration.csv"], __version__)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reflectsim",
        description="Single-frequency reflectarray imaging and material "
                    "estimation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("psf", help="focused-beam field magnitude cuts")
    _add_common(p)
    p.add_argument("--focus", type=str, default=None, help="focus point 'x,y,z' in mm")
    p.add_argument("--span-mm", type=float, default=30.0)
    p.add_argument("--step-mm", type=float, default=1.0)
    p.add_argument("--cut", choices=["x", "y", "z", "all"], default="all")
    p.set_defaults(func=cmd_psf)

    p = sub.add_parser("image", help="depth-profile reconstruction")
    _add_common(p)
    p.add_argument("--x-mm", type=str, default=None, help="comma list of pixel x")
    p.add_argument("--y-mm", type=str, default=None, help="comma list of pixel y")
    p.add_argument("--z-min-mm", type=float, default=None)
    p.add_argument("--z-max-mm", type=float, default=None)
    p.add_argument("--dz-mm", type=float, default=10.0)
    p.add_argument("--k-order", type=int, default=3)
    p.set_defaults(func=cmd_image)

    p = sub.add_parser("predict", help="analytical received-amplitude trace")
    _add_common(p)
    p.add_argument("--eps-real", type=float, required=True)
    p.add_argument("--eps-imag", type=float, default=0.0)
    p.add_argument("--thickness-mm", type=float, required=True)
    p.add_argument("--gap-mm", type=float, default=0.0)
    p.add_argument("--focus-xy", type=str, default=None)
    p.add_argument("--z-min-mm", type=float, default=None)
    p.add_argument("--z-max-mm", type=float, default=None)
    p.add_argument("--dz-mm", type=float, default=10.0)
    p.add_argument("--spreading", choices=["verbatim", "textbook"], default="verbatim")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("estimate", help="grid-search material estimation")
    _add_common(p)
    p.add_argument("measurements", nargs="?", default=None,
                   help="measurement CSV (x_mm,y_mm,z_mm,re,im + cal row)")
    p.add_argument("--synthetic", choices=sorted(TARGET_PRESETS), default=None,
                   help="generate synthetic measurements for a preset target")
    p.add_argument("--noise-snr-db", type=float, default=None)
    p.add_argument("--grid", type=str, default=None,
                   help="'er_lo:er_hi:step,ei_lo:ei_hi:step,t_lo:t_hi:step'")
    p.add_argument("--gap-mm", type=float, default=0.0)
    p.add_argument("--k-order", type=int, default=3)
    p.add_argument("--dz-mm", type=float, default=10.0)
    p.add_argument("--spreading", choices=["verbatim", "textbook"], default="verbatim")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("calibrate", help="bare-plate calibration amplitude")
    _add_common(p)
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SingularKernelError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MeasurementFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SceneValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FloatingPointError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
