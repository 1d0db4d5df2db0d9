"""File formats shared across the pipeline.

* 8-bit binary PGM (P5) for camera frames, fringe patterns, and label maps
  (label values restricted to {0, 1, 2}).
* Raw little-endian float32 rasters with a JSON sidecar header for height
  maps and per-class probability planes.
* A ``dump_json`` helper with sorted keys and fixed separators so every
  JSON artifact is byte-stable for identical inputs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .imaging import Frame, LabelMap


class FormatError(ValueError):
    """Raised for malformed or out-of-contract files."""


def dump_json(obj, path: str | Path) -> None:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    Path(path).write_bytes(text.encode("ascii") + b"\n")


def load_json(path: str | Path):
    return json.loads(Path(path).read_text())


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    """Write a (h, w) uint8 array as binary PGM, maxval 255."""
    arr = np.asarray(pixels)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise ValueError("PGM writer expects a 2-D uint8 array")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    # Header is three whitespace-separated tokens after the magic, with
    # optional '#' comment lines.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError as exc:
            raise FormatError(f"{path}: bad PGM header token {data[start:pos]!r}") from exc
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = tokens
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    expected = w * h
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise FormatError(f"{path}: raster has {len(raster)} bytes, expected {expected}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def write_frame(path: str | Path, frame: Frame) -> None:
    write_pgm(path, frame.pixels)


def read_frame(path: str | Path, frame_index: int = 0) -> Frame:
    return Frame(read_pgm(path), frame_index=frame_index)


def write_labelmap(path: str | Path, lm: LabelMap) -> None:
    write_pgm(path, lm.labels)


def read_labelmap(path: str | Path) -> LabelMap:
    values = read_pgm(path)
    if values.size and values.max() > 2:
        raise FormatError(f"{path}: label values must be in {{0, 1, 2}}")
    return LabelMap(values)


def write_float_raster(path: str | Path, data: np.ndarray, meta: dict | None = None) -> None:
    """Write float32 planes as raw bytes plus a JSON header next to them.

    ``data`` may be (h, w) or (planes, h, w). The header file is
    ``<path>.json`` and records shape, dtype, and any extra metadata.
    """
    arr = np.asarray(data, dtype="<f4")
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise ValueError("float raster must be (h, w) or (planes, h, w)")
    path = Path(path)
    path.write_bytes(arr.tobytes())
    header = {
        "dtype": "float32-le",
        "planes": arr.shape[0],
        "height": arr.shape[1],
        "width": arr.shape[2],
    }
    if meta:
        header["meta"] = meta
    dump_json(header, path.with_suffix(path.suffix + ".json"))


def read_float_raster(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    header = load_json(path.with_suffix(path.suffix + ".json"))
    if header.get("dtype") != "float32-le":
        raise FormatError(f"{path}: unsupported raster dtype {header.get('dtype')!r}")
    planes, h, w = header["planes"], header["height"], header["width"]
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size != planes * h * w:
        raise FormatError(f"{path}: raster size mismatch")
    data = raw.reshape(planes, h, w).copy()
    if planes == 1:
        data = data[0]
    return data, header.get("meta", {})
