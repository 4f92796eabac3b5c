"""Image, shift-manifest, and metadata file handling.

PGM (P5) support is self-contained so output bytes are deterministic;
multi-byte samples are big-endian per the format. PNG goes through
Pillow. Shift manifests are UTF-8 text with one "index tx ty" line per
frame at 9 significant digits.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "dequantize",
    "manifest_precision",
    "quantize",
    "read_image",
    "read_manifest",
    "read_meta",
    "read_pgm",
    "write_manifest",
    "write_meta",
    "write_pgm",
    "write_png",
]

_WHITESPACE = b" \t\r\n\x0b\x0c"


def write_pgm(path, data, maxval: int) -> None:
    """Write a P5 grayscale image; samples wider than 8 bits go big-endian."""
    arr = np.asarray(data)
    if arr.ndim != 2 or not np.issubdtype(arr.dtype, np.integer):
        raise ValueError("pgm data must be a 2D integer array")
    if not 0 < maxval < 65536:
        raise ValueError("maxval must be in [1, 65535]")
    if arr.min() < 0 or arr.max() > maxval:
        raise ValueError("pgm samples must lie in [0, maxval]")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    raster = (
        arr.astype(np.uint8) if maxval < 256 else arr.astype(">u2")
    ).tobytes()
    Path(path).write_bytes(header + raster)


def _next_token(data: bytes, pos: int):
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            pos = n if nl < 0 else nl + 1
        elif c in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE + b"#":
        pos += 1
    if start == pos:
        raise ValueError("truncated pgm header")
    return data[start:pos], pos


def read_pgm(path):
    """Read a P5 image; returns (samples, maxval) with native sample width."""
    data = Path(path).read_bytes()
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise ValueError(f"not a P5 pgm file: magic {magic!r}")
    fields = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        fields.append(int(token))
    w, h, maxval = fields
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise ValueError("invalid pgm dimensions or maxval")
    pos += 1  # single whitespace byte separates header from raster
    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    count = w * h
    raster = data[pos:]
    if len(raster) < count * dtype.itemsize:
        raise ValueError("pgm raster shorter than header promises")
    samples = np.frombuffer(raster, dtype=dtype, count=count).reshape(h, w)
    if dtype != np.uint8:
        samples = samples.astype(np.uint16)
    return samples.copy(), maxval


def quantize(grid, bits: int = 16):
    """Map a real grid linearly onto integer samples.

    Returns (samples, scale, offset) so samples * scale + offset restores
    the grid up to half a quantization step.
    """
    g = np.asarray(grid, dtype=np.float64)
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    maxval = (1 << bits) - 1
    lo = float(g.min())
    hi = float(g.max())
    if hi == lo:
        scale = 1.0
        ints = np.zeros(g.shape, dtype=np.uint16)
    else:
        scale = (hi - lo) / maxval
        ints = np.rint((g - lo) / scale).astype(np.int64)
        ints = np.clip(ints, 0, maxval).astype(np.uint16)
    if bits == 8:
        ints = ints.astype(np.uint8)
    return ints, scale, lo


def dequantize(samples, scale: float, offset: float) -> np.ndarray:
    return np.asarray(samples, dtype=np.float64) * float(scale) + float(offset)


def write_png(path, data) -> None:
    """Write 8-bit gray/RGB or 16-bit gray PNG from integer samples."""
    arr = np.asarray(data)
    if arr.ndim == 2 and arr.dtype == np.uint16:
        img = Image.fromarray(arr)
    elif arr.ndim == 2 and arr.dtype == np.uint8:
        img = Image.fromarray(arr, mode="L")
    elif arr.ndim == 3 and arr.shape[2] == 3 and arr.dtype == np.uint8:
        img = Image.fromarray(arr, mode="RGB")
    else:
        raise ValueError("expected uint8 gray/RGB or uint16 gray samples")
    img.save(path, format="PNG")


def read_image(path) -> np.ndarray:
    """Load .pgm, .png, or .npy as float64 raw sample values."""
    p = Path(path)
    suffix = p.suffix.lower()
    if suffix == ".pgm":
        samples, _ = read_pgm(p)
        return samples.astype(np.float64)
    if suffix == ".png":
        with Image.open(p) as img:
            return np.asarray(img).astype(np.float64)
    if suffix == ".npy":
        return np.asarray(np.load(p), dtype=np.float64)
    raise ValueError(f"unsupported image extension: {p.suffix}")


def manifest_precision(shifts) -> np.ndarray:
    """Round shift components through the manifest's 9-significant-digit text."""
    t = np.asarray(shifts, dtype=np.float64)
    return np.vectorize(lambda v: float(f"{v:.9g}"))(t).astype(np.float64)


def write_manifest(path, shifts) -> None:
    t = np.asarray(shifts, dtype=np.float64)
    if t.ndim != 2 or t.shape[1] != 2:
        raise ValueError("shifts must be a (n, 2) array")
    lines = [f"{i} {tx:.9g} {ty:.9g}" for i, (tx, ty) in enumerate(t)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> np.ndarray:
    entries = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"malformed manifest line: {line!r}")
        idx = int(parts[0])
        if idx in entries:
            raise ValueError(f"duplicate manifest index {idx}")
        entries[idx] = (float(parts[1]), float(parts[2]))
    if not entries:
        raise ValueError("empty shift manifest")
    n = len(entries)
    if sorted(entries) != list(range(n)):
        raise ValueError("manifest indices must cover 0..n-1 without gaps")
    return np.array([entries[i] for i in range(n)], dtype=np.float64)


def write_meta(path, meta: dict) -> None:
    Path(path).write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def read_meta(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
