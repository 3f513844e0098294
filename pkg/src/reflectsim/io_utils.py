"""File emission and parsing.

All numeric CSV output uses 9 significant digits, '.' decimal separator,
UTF-8 and LF line endings.  The run manifest is written atomically next to
the outputs it describes.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .estimator import EstimationResult, MeasurementSet

__all__ = [
    "MeasurementFormatError",
    "fmt",
    "write_rows",
    "write_measurements_csv",
    "read_measurements_csv",
    "write_error_surface_csv",
    "write_result_json",
    "write_manifest",
]

MEASUREMENT_HEADER = ["x_mm", "y_mm", "z_mm", "re", "im"]


class MeasurementFormatError(ValueError):
    """Malformed measurement file; message carries the offending line."""


def fmt(x: float) -> str:
    return f"{float(x):.9g}"


def write_rows(path: str | Path, header: list[str], rows) -> None:
    """CSV writer: numeric cells formatted to 9 significant digits,
    non-numeric cells passed through."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [c if isinstance(c, str) else fmt(c) for c in row]
            )


def write_measurements_csv(path: str | Path, meas: MeasurementSet) -> None:
    """Focus rows plus one calibration row flagged with a trailing `cal`."""
    rows = [
        [p[0], p[1], p[2], v.real, v.imag]
        for p, v in zip(meas.points, meas.values)
    ]
    cp = meas.cal_point
    rows.append([cp[0], cp[1], cp[2], meas.cal_value.real, meas.cal_value.imag, "cal"])
    write_rows(path, MEASUREMENT_HEADER, rows)


def read_measurements_csv(path: str | Path) -> MeasurementSet:
    """Parse a measurement file; raises MeasurementFormatError naming the
    first bad line."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise MeasurementFormatError(f"{path}: {exc.strerror}") from exc
    points: list[list[float]] = []
    values: list[complex] = []
    cal: tuple[np.ndarray, complex] | None = None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MEASUREMENT_HEADER:
            raise MeasurementFormatError(
                f"{path}: line 1: expected header {','.join(MEASUREMENT_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            is_cal = len(row) == 6 and row[5].strip() == "cal"
            if len(row) != 5 and not is_cal:
                raise MeasurementFormatError(
                    f"{path}: line {lineno}: expected 5 fields"
                    " (or 6 with a trailing 'cal' flag), got "
                    f"{len(row)}"
                )
            try:
                nums = [float(c) for c in row[:5]]
            except ValueError as exc:
                raise MeasurementFormatError(
                    f"{path}: line {lineno}: non-numeric field: {exc}"
                ) from exc
            if is_cal:
                if cal is not None:
                    raise MeasurementFormatError(
                        f"{path}: line {lineno}: duplicate calibration row"
                    )
                cal = (np.array(nums[:3]), complex(nums[3], nums[4]))
            else:
                points.append(nums[:3])
                values.append(complex(nums[3], nums[4]))
    if cal is None:
        raise MeasurementFormatError(f"{path}: missing calibration row (flag 'cal')")
    if not points:
        raise MeasurementFormatError(f"{path}: no measurement rows")
    try:
        return MeasurementSet(
            points=np.array(points),
            values=np.array(values),
            cal_point=cal[0],
            cal_value=cal[1],
        )
    except ValueError as exc:
        raise MeasurementFormatError(f"{path}: {exc}") from exc


def write_error_surface_csv(path: str | Path, result: EstimationResult) -> None:
    grid = result.grid

    def rows():
        for ier, er in enumerate(grid.eps_real):
            for iei, ei in enumerate(grid.eps_imag):
                for it, t in enumerate(grid.thickness_mm):
                    yield [er, ei, t, result.surface[it, ier, iei]]

    write_rows(path, ["eps_real", "eps_imag", "T_mm", "f"], rows())


def write_result_json(path: str | Path, result: EstimationResult) -> None:
    grid = result.grid
    payload = {
        "estimate": {
            "eps_real": result.eps_real,
            "eps_imag": result.eps_imag,
            "thickness_mm": result.thickness_mm,
        },
        "min_error": result.min_error,
        "grid_spec": {
            "eps_real": [float(grid.eps_real[0]), float(grid.eps_real[-1]),
                         int(grid.eps_real.size)],
            "eps_imag": [float(grid.eps_imag[0]), float(grid.eps_imag[-1]),
                         int(grid.eps_imag.size)],
            "thickness_mm": [float(grid.thickness_mm[0]), float(grid.thickness_mm[-1]),
                             int(grid.thickness_mm.size)],
        },
        "runtime_ms": result.runtime_ms,
    }
    _write_json_atomic(path, payload)


def _write_json_atomic(path: str | Path, payload: dict) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def write_manifest(
    out_dir: str | Path,
    command: str,
    config_path: str | None,
    scene_hash: str,
    overrides: dict,
    outputs: list[str],
    version: str,
) -> Path:
    """One manifest per output directory, referencing every emitted file."""
    path = Path(out_dir) / "manifest.json"
    _write_json_atomic(
        path,
        {
            "command": command,
            "config_path": config_path,
            "scene_hash": scene_hash,
            "overrides": overrides,
            "outputs": sorted(outputs),
            "version": version,
        },
    )
    return path
