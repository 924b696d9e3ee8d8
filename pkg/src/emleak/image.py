"""Grayscale frames and binary PGM (P5) persistence.

Intensities live in [0, 1]; the bit-depth hint only decides the maxval
used when quantizing to disk (8 -> 255, 10 -> 1023).  Samples above 255
are stored most-significant byte first, as the format requires.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAXVAL_BY_DEPTH = {8: 255, 10: 1023}
DEPTH_BY_MAXVAL = {v: k for k, v in MAXVAL_BY_DEPTH.items()}


class ImageFormatError(ValueError):
    """Raised for malformed image files."""


@dataclass(frozen=True)
class GrayImage:
    """Immutable grayscale image, row-major float64 in [0, 1]."""

    pixels: np.ndarray
    bit_depth_hint: int = 8

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.float64))
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("pixels must be a non-empty 2-D array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("pixels must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("pixels must lie in [0, 1]")
        if self.bit_depth_hint not in MAXVAL_BY_DEPTH:
            raise ValueError(f"bit_depth_hint must be one of {sorted(MAXVAL_BY_DEPTH)}")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def from_flat(width: int, height: int, flat: np.ndarray, bit_depth_hint: int = 8) -> GrayImage:
    """Build an image from a row-major flat pixel sequence."""
    arr = np.asarray(flat, dtype=np.float64)
    if arr.size != width * height:
        raise ValueError(f"expected {width * height} pixels, got {arr.size}")
    return GrayImage(arr.reshape(height, width), bit_depth_hint=bit_depth_hint)


def normalized(arr: np.ndarray, bit_depth_hint: int = 8) -> GrayImage:
    """Min-max normalize an arbitrary finite array into a GrayImage.

    A constant array maps to all zeros: with no spread there is nothing
    to place, and zero is the documented convention.
    """
    a = np.asarray(arr, dtype=np.float64)
    lo, hi = float(a.min()), float(a.max())
    if hi - lo <= 0.0:
        return GrayImage(np.zeros_like(a), bit_depth_hint=bit_depth_hint)
    return GrayImage((a - lo) / (hi - lo), bit_depth_hint=bit_depth_hint)


def write_image(image: GrayImage, path: str | Path) -> Path:
    """Write a binary PGM; maxval follows the image's bit-depth hint."""
    maxval = MAXVAL_BY_DEPTH[image.bit_depth_hint]
    codes = np.rint(image.pixels * maxval).astype(np.uint16)
    header = f"P5\n{image.width} {image.height}\n{maxval}\n".encode("ascii")
    if maxval > 255:
        body = codes.astype(">u2").tobytes()
    else:
        body = codes.astype(np.uint8).tobytes()
    p = Path(path)
    try:
        with open(p, "wb") as fh:
            fh.write(header + body)
    except OSError:
        if p.exists():
            try:
                p.unlink()
            except OSError:
                pass
        raise
    return p


def read_image(path: str | Path) -> GrayImage:
    """Read a binary PGM with maxval 255 or 1023."""
    p = Path(path)
    if not p.exists():
        raise ImageFormatError(f"no such image {p}")
    blob = p.read_bytes()
    magic, offset = _next_token(blob, 0, p)
    if magic != b"P5":
        raise ImageFormatError(f"{p}: expected magic P5, got {magic!r}")
    tokens = []
    for _ in range(3):
        token, offset = _next_token(blob, offset, p)
        tokens.append(token)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ImageFormatError(f"{p}: non-numeric header token in {tokens!r}") from None
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{p}: bad dimensions {width}x{height}")
    if maxval not in DEPTH_BY_MAXVAL:
        raise ImageFormatError(f"{p}: unsupported maxval {maxval} (need 255 or 1023)")
    # exactly one whitespace byte separates maxval from the raster
    offset += 1
    body = blob[offset:]
    dtype = ">u2" if maxval > 255 else np.uint8
    expected = width * height * (2 if maxval > 255 else 1)
    if len(body) != expected:
        raise ImageFormatError(f"{p}: raster is {len(body)} bytes, expected {expected}")
    codes = np.frombuffer(body, dtype=dtype).astype(np.float64).reshape(height, width)
    if codes.max() > maxval:
        raise ImageFormatError(f"{p}: sample exceeds maxval {maxval}")
    return GrayImage(codes / maxval, bit_depth_hint=DEPTH_BY_MAXVAL[maxval])


def _next_token(blob: bytes, offset: int, path: Path) -> tuple[bytes, int]:
    """Scan the next header token, skipping whitespace and # comments."""
    n = len(blob)
    while offset < n:
        c = blob[offset : offset + 1]
        if c in b" \t\r\n":
            offset += 1
        elif c == b"#":
            while offset < n and blob[offset : offset + 1] != b"\n":
                offset += 1
        else:
            break
    if offset >= n:
        raise ImageFormatError(f"{path}: truncated header")
    start = offset
    while offset < n and blob[offset : offset + 1] not in b" \t\r\n":
        offset += 1
    return blob[start:offset], offset
