"""Command-line front end tests.

All runs go through `main(argv)` in process on desk-top configs written
to tmp_path, so each subcommand stays under a few seconds.  The estimate
runs use the air-gap preset, whose synthetic measurements come from the
analytical model rather than the imaging chain.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from reflectsim.cli import main
from reflectsim.go import GoModel
from reflectsim.imager import PoImager
from reflectsim.scene import build_scene, default_config, serialize_config

GRID = "2.5:3.5:0.25,0:0.02:0.01,35:39:1"


def write_config(path: Path, target: str | None = None,
                 plate: tuple[float, float] = (120.0, 100.0)) -> dict:
    cfg = default_config(scale="reduced", target=target)
    for fara in cfg["faras"]:
        fara["side_mm"] = 60.0
    cfg["plate"]["extent_mm"] = list(plate)
    cfg["mesh"]["max_edge_mm"] = cfg["faras"][0]["pitch_mm"]
    path.write_text(serialize_config(cfg), encoding="utf-8")
    return cfg


def read_csv(path: Path) -> list[list[str]]:
    lines = path.read_text(encoding="utf-8").strip().split("\n")
    return [line.split(",") for line in lines]


def test_psf_writes_cut_rows(tmp_path):
    cfg_path = tmp_path / "scene.json"
    write_config(cfg_path)
    out = tmp_path / "out"
    rc = main([
        "psf", "--config", str(cfg_path), "--scale", "config",
        "--out", str(out), "--span-mm", "10", "--step-mm", "5", "--cut", "x",
    ])
    assert rc == 0
    rows = read_csv(out / "psf.csv")
    assert rows[0] == ["x_mm", "y_mm", "z_mm", "magnitude"]
    assert len(rows) == 1 + 5  # offsets -10..10 step 5
    mags = np.array([float(r[3]) for r in rows[1:]])
    assert np.all(mags > 0)
    # focus defaulted to the plate centre; the centre sample is the peak
    assert float(rows[3][0]) == 500.0
    assert mags[2] == np.max(mags)

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "psf"
    assert manifest["outputs"] == ["psf.csv"]
    assert manifest["config_path"] == str(cfg_path)
    assert manifest["scene_hash"]
    assert manifest["version"]


def test_psf_rejects_focus_outside_roi(tmp_path, capsys):
    cfg_path = tmp_path / "scene.json"
    write_config(cfg_path)
    rc = main([
        "psf", "--config", str(cfg_path), "--scale", "config",
        "--out", str(tmp_path / "out"), "--focus", "2000,920,800",
    ])
    assert rc == 1
    assert "RoI" in capsys.readouterr().err


def test_image_bare_plate(tmp_path):
    cfg_path = tmp_path / "scene.json"
    write_config(cfg_path)
    out = tmp_path / "out"
    rc = main([
        "image", "--config", str(cfg_path), "--scale", "config",
        "--out", str(out), "--k-order", "1",
        "--z-min-mm", "760", "--z-max-mm", "840", "--dz-mm", "20",
    ])
    assert rc == 0
    profile = read_csv(out / "profile.csv")
    assert profile[0] == ["x_mm", "y_mm", "z_imaging_mm", "peak_magnitude"]
    assert len(profile) == 2
    assert float(profile[1][2]) == 800.0  # bare plate images at its own depth
    scans = read_csv(out / "scans.csv")
    assert scans[0] == ["x_mm", "y_mm", "z_mm", "re", "im"]
    assert len(scans) == 1 + 5
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outputs"] == ["profile.csv", "scans.csv"]


def test_predict_matches_model(tmp_path):
    cfg_path = tmp_path / "scene.json"
    cfg = write_config(cfg_path)
    out = tmp_path / "out"
    rc = main([
        "predict", "--config", str(cfg_path), "--scale", "config",
        "--out", str(out), "--eps-real", "4", "--eps-imag", "0.2",
        "--thickness-mm", "40",
        "--z-min-mm", "740", "--z-max-mm", "780", "--dz-mm", "20",
    ])
    assert rc == 0
    rows = read_csv(out / "trace.csv")
    assert rows[0] == ["focus_z_mm", "re", "im", "magnitude", "phase_deg"]
    assert len(rows) == 1 + 3

    model = GoModel(build_scene(cfg))
    want = model.predict(np.array([500.0, 920.0, 760.0]), 4.0 - 0.2j, 40.0)
    got = complex(float(rows[2][1]), float(rows[2][2]))
    assert got == pytest.approx(want, rel=1e-6)  # CSV keeps 9 significant digits
    assert float(rows[2][3]) == pytest.approx(abs(want), rel=1e-6)


def test_calibrate_matches_imager(tmp_path):
    cfg_path = tmp_path / "scene.json"
    cfg = write_config(cfg_path)
    out = tmp_path / "out"
    rc = main([
        "calibrate", "--config", str(cfg_path), "--scale", "config",
        "--out", str(out),
    ])
    assert rc == 0
    rows = read_csv(out / "calibration.csv")
    assert rows[1][5] == "cal"
    got = complex(float(rows[1][3]), float(rows[1][4]))
    imager = PoImager(build_scene(cfg), k_order=1)
    want = complex(imager.scan(np.array([[500.0, 920.0, 800.0]])).primary[0])
    assert got == pytest.approx(want, rel=1e-6)


def estimate_args(cfg_path: Path, out: Path, extra: list[str]) -> list[str]:
    return [
        "estimate", "--config", str(cfg_path), "--scale", "config",
        "--out", str(out), "--grid", GRID, *extra,
    ]


def test_estimate_synthetic_gap_preset_recovers_truth(tmp_path):
    cfg_path = tmp_path / "scene.json"
    write_config(cfg_path, plate=(220.0, 170.0))
    out = tmp_path / "out"
    rc = main(estimate_args(cfg_path, out, ["--synthetic", "pa66"]))
    assert rc == 0
    result = json.loads((out / "result.json").read_text())
    # noise-free analytical measurements invert onto their own grid node
    assert result["estimate"] == {
        "eps_real": 3.0, "eps_imag": 0.01, "thickness_mm": 37.0
    }
    assert result["min_error"] < 1e-9
    assert (out / "measurements.csv").exists()
    surface = read_csv(out / "error_surface.csv")
    assert surface[0] == ["eps_real", "eps_imag", "thickness_mm", "error"]
    assert len(surface) == 1 + 5 * 3 * 5
    manifest = json.loads((out / "manifest.json").read_text())
    assert sorted(manifest["outputs"]) == [
        "error_surface.csv", "measurements.csv", "result.json",
    ]


def test_estimate_reruns_are_byte_identical(tmp_path):
    cfg_path = tmp_path / "scene.json"
    write_config(cfg_path, plate=(220.0, 170.0))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(estimate_args(
            cfg_path, out,
            ["--synthetic", "pa66", "--noise-snr-db", "20", "--seed", "3"],
        ))
        assert rc == 0
        outs.append(out)
    a, b = outs
    for csv_name in ("measurements.csv", "error_surface.csv"):
        assert (a / csv_name).read_bytes() == (b / csv_name).read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    ra = json.loads((a / "result.json").read_text())
    rb = json.loads((b / "result.json").read_text())
    ra.pop("runtime_ms"), rb.pop("runtime_ms")
    assert ra == rb


def test_estimate_from_measurement_file(tmp_path):
    cfg_path = tmp_path / "scene.json"
    write_config(cfg_path, plate=(220.0, 170.0))
    first = tmp_path / "first"
    rc = main(estimate_args(cfg_path, first, ["--synthetic", "pa66"]))
    assert rc == 0

    second = tmp_path / "second"
    rc = main(estimate_args(
        cfg_path, second,
        [str(first / "measurements.csv"), "--gap-mm", "1",
         "--target", "pa66"],
    ))
    assert rc == 0
    ra = json.loads((first / "result.json").read_text())
    rb = json.loads((second / "result.json").read_text())
    assert ra["estimate"] == rb["estimate"]


def test_estimate_requires_exactly_one_source(tmp_path, capsys):
    cfg_path = tmp_path / "scene.json"
    write_config(cfg_path, plate=(220.0, 170.0))
    rc = main(estimate_args(cfg_path, tmp_path / "o1", []))
    assert rc == 1
    rc = main(estimate_args(
        cfg_path, tmp_path / "o2",
        ["measurements.csv", "--synthetic", "pa66"],
    ))
    assert rc == 1
    assert "exactly one" in capsys.readouterr().err


def test_estimate_missing_file_is_io_error(tmp_path):
    cfg_path = tmp_path / "scene.json"
    write_config(cfg_path, plate=(220.0, 170.0))
    rc = main(estimate_args(
        cfg_path, tmp_path / "out", [str(tmp_path / "absent.csv")]
    ))
    assert rc == 2


def test_estimate_malformed_csv_reports_line(tmp_path, capsys):
    cfg_path = tmp_path / "scene.json"
    write_config(cfg_path, plate=(220.0, 170.0))
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "x_mm,y_mm,z_mm,re,im\n500,920,760,1.0,oops\n", encoding="utf-8"
    )
    rc = main(estimate_args(cfg_path, tmp_path / "out", [str(bad)]))
    assert rc == 2
    assert "line 2" in capsys.readouterr().err


def test_bad_grid_is_validation_error(tmp_path, capsys):
    cfg_path = tmp_path / "scene.json"
    write_config(cfg_path, plate=(220.0, 170.0))
    rc = main([
        "estimate", "--config", str(cfg_path), "--scale", "config",
        "--out", str(tmp_path / "out"), "--grid", "1:2",
        "--synthetic", "pa66",
    ])
    assert rc == 1
    assert "--grid" in capsys.readouterr().err


def test_version_exits_cleanly():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
