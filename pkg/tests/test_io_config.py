import json

import numpy as np
import pytest

from sipo.config import REGISTRY, RunConfig, help_text
from sipo.errors import (ConfigError, CorruptHeader, ShapeMismatchWithSidecar,
                         UnsupportedFormat)
from sipo.fieldio import (export_field, ingest_field, ingest_target, read_pgm,
                          sidecar_path)
from sipo.material import RichardsParams

P = RichardsParams()


def test_raw_f32_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    field = rng.standard_normal((7, 9)).astype(np.float32).astype(float)
    path = tmp_path / "field.f32"
    export_field(field, path)
    back = ingest_field(path)
    assert back.dtype == np.float32
    assert np.array_equal(back.astype(float), field)
    assert back.tobytes() == field.astype("<f4").tobytes()


def test_raw_3d_round_trip(tmp_path):
    field = np.arange(3 * 4 * 5, dtype=np.float32).reshape(3, 4, 5)
    path = tmp_path / "vol.f32"
    export_field(field, path, units="dose")
    meta = json.loads(open(sidecar_path(path)).read())
    assert meta["shape"] == [3, 4, 5]
    assert meta["units"] == "dose"
    assert np.array_equal(ingest_field(path), field)


def test_sidecar_shape_mismatch_detected(tmp_path):
    field = np.ones((4, 4), dtype=np.float32)
    path = tmp_path / "f.f32"
    export_field(field, path)
    meta = json.loads(open(sidecar_path(path)).read())
    meta["shape"] = [5, 5]
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh)
    with pytest.raises(ShapeMismatchWithSidecar):
        ingest_field(path)


def test_missing_sidecar_unsupported(tmp_path):
    path = tmp_path / "naked.f32"
    np.ones(4, dtype="<f4").tofile(path)
    with pytest.raises(UnsupportedFormat):
        ingest_field(path)


def _write_p2(path, pixels, maxval):
    rows = [" ".join(str(v) for v in row) for row in pixels]
    path.write_text(f"P2\n# comment line\n{pixels.shape[1]} "
                    f"{pixels.shape[0]}\n{maxval}\n" + "\n".join(rows) + "\n")


def _write_p5(path, pixels, maxval):
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n{maxval}\n".encode()
    dtype = ">u2" if maxval > 255 else np.uint8
    path.write_bytes(header + pixels.astype(dtype).tobytes())


def test_p2_and_p5_ingest_identically(tmp_path):
    rng = np.random.default_rng(1)
    pixels = rng.integers(0, 256, size=(6, 8))
    p2 = tmp_path / "img.ascii.pgm"
    p5 = tmp_path / "img.bin.pgm"
    _write_p2(p2, pixels, 255)
    _write_p5(p5, pixels, 255)
    a = ingest_target(p2, P)
    b = ingest_target(p5, P)
    assert np.array_equal(a, b)


def test_pgm_midlevel_pixel_maps_linearly(tmp_path):
    pixels = np.array([[0, 128], [255, 64]])
    path = tmp_path / "img.pgm"
    _write_p2(path, pixels, 255)
    m = ingest_target(path, P)
    assert m[0, 1] == pytest.approx(128 / 255, abs=1e-12)
    assert m[0, 0] == 0.0                      # background stays at alpha
    assert m[1, 0] < 1.0                       # clamped inside the asymptote
    assert m[1, 0] == pytest.approx(1.0, abs=1e-5)


def test_pgm_16bit_p5(tmp_path):
    pixels = np.array([[0, 40000], [65535, 1]])
    path = tmp_path / "img16.pgm"
    _write_p5(path, pixels, 65535)
    arr, maxval = read_pgm(path)
    assert maxval == 65535
    assert np.array_equal(arr, pixels)


def test_corrupt_pgm_rejected(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P5\n4 nonsense\n255\n")
    with pytest.raises(CorruptHeader):
        read_pgm(path)
    path2 = tmp_path / "short.pgm"
    path2.write_bytes(b"P5\n4 4\n255\nab")
    with pytest.raises(CorruptHeader):
        read_pgm(path2)
    path3 = tmp_path / "neither.png"
    path3.write_bytes(b"\x89PNG....")
    with pytest.raises(UnsupportedFormat):
        ingest_target(path3, P)


def test_pgm_export_round_trip(tmp_path):
    field = np.zeros((8, 8))
    field[2:6, 2:6] = 0.5
    path = tmp_path / "target.pgm"
    export_field(field, path)
    m = ingest_target(path, P)
    assert np.abs(m - field).max() < 1e-4      # 16-bit quantization


# ---------- config ----------

def test_config_defaults_and_overrides(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(
        "# a comment\n"
        "problem.kind = case2   # trailing comment\n"
        "problem.m_crit = 0.33\n"
        "phantom.levels = 0.7, 0.6, 0.5\n"
        "domain.band_free = true\n")
    cfg = RunConfig.from_file(cfg_file)
    assert cfg["problem.kind"] == "case2"
    assert cfg["problem.m_crit"] == 0.33
    assert cfg["phantom.levels"] == (0.7, 0.6, 0.5)
    assert cfg["domain.band_free"] is True
    assert cfg["solver.max_iters"] == REGISTRY["solver.max_iters"].default


def test_config_unknown_key_named(tmp_path):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("problem.knid = general\n")
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_file(cfg_file)
    assert "problem.knid" in str(excinfo.value)


def test_config_bad_value_named(tmp_path):
    cfg_file = tmp_path / "bad2.cfg"
    cfg_file.write_text("solver.max_iters = soon\n")
    with pytest.raises(ConfigError) as excinfo:
        RunConfig.from_file(cfg_file)
    assert excinfo.value.key == "solver.max_iters"


def test_manifest_contains_every_key(tmp_path):
    cfg = RunConfig({"problem.w1": 2.0})
    manifest = tmp_path / "manifest.cfg"
    cfg.write_manifest(manifest)
    text = manifest.read_text()
    for key in REGISTRY:
        assert key in text
    # The manifest re-parses to the same resolved values.
    again = RunConfig.from_file(manifest)
    assert list(again.items()) == list(cfg.items())


def test_help_text_lists_all_keys():
    text = help_text()
    for key in REGISTRY:
        assert key in text
