"""Target/field file formats.

2D response targets travel as PGM (P2 or P5, 8- or 16-bit); everything
else — 3D volumes and exact-precision fields — as raw little-endian
float32 with a JSON sidecar describing shape and layout.  The sidecar
lives next to the payload with a ``.json`` suffix appended.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import (CorruptHeader, ShapeMismatchWithSidecar,
                     UnsupportedFormat)
from .material import RichardsParams

# Ingested responses are clamped this far inside the asymptotes so the
# inverse mapping stays finite at full-scale pixels.
PGM_CLAMP_MARGIN = 1e-6


def sidecar_path(path) -> str:
    return str(path) + ".json"


def export_field(field: np.ndarray, path, units: str = "response") -> None:
    """Raw f32le payload + JSON sidecar; PGM when the path says so."""
    path = str(path)
    if path.lower().endswith(".pgm"):
        _write_pgm(field, path)
        return
    field = np.asarray(field)
    payload = np.ascontiguousarray(field, dtype="<f4")
    payload.tofile(path)
    meta = {
        "shape": list(field.shape),
        "order": "row-major",
        "dtype": "f32le",
        "units": units,
    }
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


def ingest_field(path) -> np.ndarray:
    """Raw f32le array described by its sidecar (values kept as written)."""
    path = str(path)
    try:
        with open(sidecar_path(path)) as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise UnsupportedFormat(
            f"{path}: no JSON sidecar; cannot interpret raw payload") from exc
    except json.JSONDecodeError as exc:
        raise CorruptHeader(f"{sidecar_path(path)}: {exc}") from exc
    if meta.get("dtype") != "f32le" or meta.get("order") != "row-major":
        raise UnsupportedFormat(f"{path}: sidecar declares {meta}")
    shape = tuple(int(s) for s in meta["shape"])
    data = np.fromfile(path, dtype="<f4")
    if data.size != int(np.prod(shape)):
        raise ShapeMismatchWithSidecar(
            f"{path}: payload has {data.size} values, sidecar says {shape}")
    return data.reshape(shape)


def _write_pgm(field: np.ndarray, path, maxval: int = 65535) -> None:
    # Pixel = value * maxval: PGM carries response-like fields in [0, 1]
    # (fraction of the upper asymptote); anything outside clips.
    field = np.asarray(field, dtype=float)
    if field.ndim != 2:
        raise UnsupportedFormat("PGM export is 2D only")
    pixels = np.clip(np.rint(field * maxval), 0, maxval).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{field.shape[1]} {field.shape[0]}\n{maxval}\n".encode())
        fh.write(pixels.tobytes())


def _read_pgm_tokens(raw: bytes, count: int):
    """Header tokens after the magic, skipping '#' comments."""
    tokens = []
    i = 2
    while len(tokens) < count:
        while i < len(raw) and raw[i:i + 1].isspace():
            i += 1
        if i < len(raw) and raw[i:i + 1] == b"#":
            while i < len(raw) and raw[i:i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(raw) and not raw[i:i + 1].isspace():
            i += 1
        if start == i:
            raise CorruptHeader("truncated PGM header")
        tokens.append(raw[start:i])
    return tokens, i + 1  # one whitespace after maxval precedes the raster


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Pixel array (rows, cols) and maxval for P2/P5 files."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic = raw[:2]
    if magic not in (b"P2", b"P5"):
        raise UnsupportedFormat(f"{path}: not a P2/P5 PGM (magic {magic!r})")
    try:
        tokens, offset = _read_pgm_tokens(raw, 3)
        width, height, maxval = (int(t) for t in tokens)
    except (ValueError, CorruptHeader) as exc:
        raise CorruptHeader(f"{path}: bad PGM header") from exc
    if maxval <= 0 or maxval > 65535:
        raise CorruptHeader(f"{path}: maxval {maxval} out of range")
    n = width * height
    if magic == b"P2":
        try:
            data = np.array(raw[offset - 1:].split()[:n], dtype=np.int64)
        except ValueError as exc:
            raise CorruptHeader(f"{path}: non-numeric P2 payload") from exc
    else:
        dtype = ">u2" if maxval > 255 else np.uint8
        data = np.frombuffer(raw[offset:], dtype=dtype, count=-1)
        if data.size < n:
            raise CorruptHeader(f"{path}: P5 payload too short")
        data = data[:n].astype(np.int64)
    if data.size != n:
        raise CorruptHeader(f"{path}: expected {n} pixels, got {data.size}")
    if data.max(initial=0) > maxval:
        raise CorruptHeader(f"{path}: pixel value exceeds maxval")
    return data.reshape(height, width), maxval


def ingest_target(path, p: RichardsParams) -> np.ndarray:
    """Response field from a target file.

    PGM pixels map linearly onto the response range and are clamped just
    inside the asymptotes; zero pixels stay at the lower asymptote
    (background).  Raw f32 payloads are taken verbatim.
    """
    path = str(path)
    if not os.path.exists(path):
        raise UnsupportedFormat(f"{path}: no such file")
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic in (b"P2", b"P5"):
        pixels, maxval = read_pgm(path)
        m = p.alpha + (pixels.astype(float) / maxval) * p.span
        margin = PGM_CLAMP_MARGIN * p.span
        positive = pixels > 0
        m[positive] = np.clip(m[positive], p.alpha + margin, p.k - margin)
        return m
    return ingest_field(path).astype(float)
