"""Deterministic synthetic palm cards for closed-loop experiments.

Two palm-like subjects (surface creases, subsurface veins) plus two
calibration ramps.  Every card is built from exact 10-bit codes so a
card survives quantization unchanged: simulating it and rounding back
reproduces the codes bit-for-bit.
"""

from __future__ import annotations

import numpy as np

from .image import GrayImage
from .csi2 import MAX_CODE

PRINT_BACKGROUND = 878
PRINT_DEPTH = 578  # crease core lands at code 300
VEIN_BACKGROUND = 840
VEIN_DEPTH = 190  # vein core lands at code 650: visibly weaker contrast
RAMP_STRIP_ROWS = 8
RAMP_STRIP_CODE = 617  # msb 154, lsb 1: both bit-groups non-trivial
LOW_SPAN_BASE = 480
LOW_SPAN_CODES = 64  # 16 msb levels across the span
LOW_STRIP_CODE = 510

_CURVE_SAMPLES = 256


def _bezier(p0, p1, p2, n=_CURVE_SAMPLES) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = (1 - t) ** 2 * np.asarray(p0) + 2 * (1 - t) * t * np.asarray(p1) + t**2 * np.asarray(p2)
    return pts


def _stroke_depth(height: int, width: int, strokes, thickness: float, depth: int) -> np.ndarray:
    """Per-pixel darkening from a set of curved strokes (soft 1-px edge)."""
    rr = np.arange(height, dtype=np.float64)[:, None]
    cc = np.arange(width, dtype=np.float64)[None, :]
    darkening = np.zeros((height, width))
    for p0, p1, p2 in strokes:
        pts = _bezier(p0, p1, p2) * np.array([height - 1, width - 1])
        d2 = (rr[..., None] - pts[:, 0]) ** 2 + (cc[..., None] - pts[:, 1]) ** 2
        dist = np.sqrt(d2.min(axis=-1))
        frac = np.clip(thickness + 0.5 - dist, 0.0, 1.0)
        darkening = np.maximum(darkening, depth * frac)
    return darkening


def _from_codes(codes: np.ndarray) -> GrayImage:
    codes = np.clip(np.rint(codes), 0, MAX_CODE).astype(np.float64)
    return GrayImage(codes / MAX_CODE, bit_depth_hint=10)


def palm_print_card(width: int = 64, height: int = 64) -> GrayImage:
    """Surface modality: deep crease lines on a bright background."""
    strokes = [
        ((0.15, 0.05), (0.35, 0.55), (0.25, 0.95)),
        ((0.35, 0.05), (0.55, 0.45), (0.75, 0.90)),
        ((0.55, 0.08), (0.80, 0.35), (0.95, 0.55)),
        ((0.70, 0.60), (0.78, 0.75), (0.85, 0.92)),
    ]
    darkening = _stroke_depth(height, width, strokes, thickness=1.2, depth=PRINT_DEPTH)
    return _from_codes(PRINT_BACKGROUND - darkening)


def palm_vein_card(width: int = 64, height: int = 64) -> GrayImage:
    """Subsurface modality: a thinner, fainter branching pattern."""
    strokes = [
        ((0.05, 0.50), (0.40, 0.45), (0.90, 0.55)),
        ((0.45, 0.48), (0.60, 0.30), (0.85, 0.15)),
        ((0.50, 0.50), (0.65, 0.70), (0.90, 0.80)),
    ]
    darkening = _stroke_depth(height, width, strokes, thickness=0.9, depth=VEIN_DEPTH)
    return _from_codes(VEIN_BACKGROUND - darkening)


def ramp_card(width: int = 64, height: int = 64) -> GrayImage:
    """Full-range raster ramp plus a flat strip.

    The ramp section walks every 10-bit code (raster order); the
    bottom strip holds one constant code for uniform-region targeting.
    """
    if height <= RAMP_STRIP_ROWS:
        raise ValueError("card too short for the flat strip")
    ramp_rows = height - RAMP_STRIP_ROWS
    n = ramp_rows * width
    idx = np.arange(n, dtype=np.float64).reshape(ramp_rows, width)
    codes = np.full((height, width), float(RAMP_STRIP_CODE))
    codes[:ramp_rows] = np.rint(idx * MAX_CODE / (n - 1))
    return _from_codes(codes)


def low_contrast_ramp_card(width: int = 64, height: int = 64) -> GrayImage:
    """Narrow-span column ramp (64 codes) plus a flat strip.

    The span crosses only 16 msb levels, so the msb bit-group alone
    renders it as coarse terraces; the lsb group carries the rest.
    """
    if height <= RAMP_STRIP_ROWS:
        raise ValueError("card too short for the flat strip")
    ramp_rows = height - RAMP_STRIP_ROWS
    col = np.arange(width, dtype=np.float64)
    ramp = LOW_SPAN_BASE + np.rint(col * (LOW_SPAN_CODES - 1) / (width - 1))
    codes = np.full((height, width), float(LOW_STRIP_CODE))
    codes[:ramp_rows] = np.broadcast_to(ramp, (ramp_rows, width))
    return _from_codes(codes)
