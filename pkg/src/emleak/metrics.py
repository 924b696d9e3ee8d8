"""Image fidelity metrics and reusable image statistics.

PSNR and SSIM operate on [0, 1] intensities with a fixed dynamic range
of 1, so scores are comparable across the whole pipeline.  SSIM follows
the classic Gaussian-window construction (11x11, sigma 1.5, k1=0.01,
k2=0.03) evaluated on fully interior windows only, which keeps the
definition free of any boundary policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate2d

from .image import GrayImage

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 1.0
ENTROPY_BINS = 256


@dataclass(frozen=True)
class MetricReport:
    """Per-image comparison summary: fidelity pair plus recon statistics."""

    psnr_db: float
    ssim: float
    entropy_nats: float
    edge_intensity: float


def _pixels(image: GrayImage | np.ndarray) -> np.ndarray:
    if isinstance(image, GrayImage):
        return image.pixels
    return np.asarray(image, dtype=np.float64)


def psnr(a: GrayImage | np.ndarray, b: GrayImage | np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB over a unit dynamic range.

    Parameters
    ----------
    a, b : GrayImage or ndarray
        Images of identical shape with intensities in [0, 1].

    Returns
    -------
    float
        ``10 log10(1 / mse)``; ``math.inf`` is the documented sentinel
        for identical inputs.
    """
    x, y = _pixels(a), _pixels(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DYNAMIC_RANGE**2 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian weighting window."""
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def ssim(a: GrayImage | np.ndarray, b: GrayImage | np.ndarray) -> float:
    """Mean structural similarity over interior Gaussian windows.

    Parameters
    ----------
    a, b : GrayImage or ndarray
        Images of identical shape, both dimensions at least the window
        size (11).

    Returns
    -------
    float
        Mean of the local SSIM map.  Identical inputs score exactly 1.
    """
    x, y = _pixels(a), _pixels(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {x.shape}")
    w = gaussian_window()
    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2

    mu_x = correlate2d(x, w, mode="valid")
    mu_y = correlate2d(y, w, mode="valid")
    var_x = correlate2d(x * x, w, mode="valid") - mu_x**2
    var_y = correlate2d(y * y, w, mode="valid") - mu_y**2
    cov = correlate2d(x * y, w, mode="valid") - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def histogram_entropy(image: GrayImage | np.ndarray, bins: int = ENTROPY_BINS) -> float:
    """Intensity entropy in nats over a uniform [0, 1] histogram."""
    counts, _ = np.histogram(_pixels(image), bins=bins, range=(0.0, 1.0))
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def gradient_magnitude(image: GrayImage | np.ndarray) -> np.ndarray:
    """Per-pixel gradient magnitude (central differences, one-sided at borders)."""
    arr = _pixels(image)
    gy, gx = np.gradient(arr)
    return np.sqrt(gx**2 + gy**2)


def edge_intensity(image: GrayImage | np.ndarray) -> float:
    """Mean gradient magnitude; zero exactly for constant images."""
    return float(np.mean(gradient_magnitude(image)))


def distinct_levels(image: GrayImage | np.ndarray, resolution: float = 1e-6) -> int:
    """Number of distinct intensity levels at the given resolution.

    Values are snapped to a uniform grid of spacing ``resolution`` before
    counting, so accumulation noise many orders below the smallest real
    quantization step does not inflate the count.  The default is far
    finer than any step a 10-bit source can produce (~1e-3) while far
    coarser than float64 round-off.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    arr = _pixels(image)
    return int(np.unique(np.round(arr / resolution)).size)


def metric_report(recon: GrayImage, truth: GrayImage) -> MetricReport:
    """Fidelity of ``recon`` against ``truth`` plus recon-side statistics."""
    return MetricReport(
        psnr_db=psnr(recon, truth),
        ssim=ssim(recon, truth),
        entropy_nats=histogram_entropy(recon),
        edge_intensity=edge_intensity(recon),
    )
