"""Figure rendering for the report path.

All figures go straight to files via the Agg backend; nothing here
opens a window.  Each renderer takes already-computed results, so the
numeric pipeline never depends on this module.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bands import BandReport, Verdict
from .fusion import FusionWeights
from .image import GrayImage
from .raster import SyncModel

_VERDICT_COLORS = {
    Verdict.ACCEPTED: "#2a9d3f",
    Verdict.REJECTED_STAGE1: "#b0b0b0",
    Verdict.REJECTED_STAGE2: "#d08030",
}


def envelope_figure(
    env: np.ndarray,
    path: str | Path,
    sync: SyncModel | None = None,
    max_samples: int = 20000,
) -> Path:
    """Envelope head with detected frame starts and the blanking threshold."""
    n = min(len(env), max_samples)
    fig, ax = plt.subplots(figsize=(9, 3))
    ax.plot(np.arange(n), env[:n], linewidth=0.5, color="#30507a")
    if sync is not None:
        ax.axhline(sync.theta_blank, color="#c04040", linewidth=0.8, label="blanking threshold")
        for start in sync.frame_starts:
            if start >= n:
                break
            ax.axvline(start, color="#2a9d3f", linewidth=0.8, alpha=0.7)
        ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("sample")
    ax.set_ylabel("envelope")
    ax.set_title("capture envelope")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def scan_figure(reports: Sequence[BandReport], path: str | Path) -> Path:
    """Stage-1 statistics per scanned band, colored by verdict."""
    fig, axes = plt.subplots(3, 1, figsize=(8, 6), sharex=True)
    centers = [(r.f_low_hz + r.f_high_hz) / 2.0 for r in reports]
    width = min((r.f_high_hz - r.f_low_hz) for r in reports) * 0.8 if reports else 1.0
    colors = [_VERDICT_COLORS[r.verdict] for r in reports]
    energies = [r.stats.energy if r.stats else 0.0 for r in reports]
    peaks = [r.stats.autocorr_peak if r.stats else 0.0 for r in reports]
    entropies = [r.stats.spectral_entropy if r.stats else 0.0 for r in reports]
    for ax, values, label in zip(
        axes, (energies, peaks, entropies), ("energy", "autocorr peak", "spectral entropy")
    ):
        ax.bar(centers, values, width=width, color=colors)
        ax.set_ylabel(label)
    axes[0].set_yscale("log")
    axes[0].set_ylim(bottom=max(min(e for e in energies if e > 0), 1e-12) * 0.5 if any(energies) else 1e-12)
    axes[-1].set_xlabel("band center [Hz]")
    axes[0].set_title("band scan (green accepted, orange stage-2 reject, gray stage-1 reject)")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def image_grid_figure(
    images: Sequence[tuple[str, GrayImage]], path: str | Path, columns: int = 3
) -> Path:
    """Grayscale thumbnails with titles, up to ``columns`` per row."""
    if not images:
        raise ValueError("image_grid_figure needs at least one image")
    n = len(images)
    cols = min(columns, n)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 3 * rows), squeeze=False)
    for ax in axes.flat:
        ax.axis("off")
    for ax, (title, image) in zip(axes.flat, images):
        ax.imshow(image.pixels, cmap="gray", vmin=0.0, vmax=1.0, interpolation="nearest")
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def weights_figure(weights: FusionWeights, path: str | Path) -> Path:
    alpha = weights.as_array()
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.bar(np.arange(alpha.size), alpha, color="#30507a")
    ax.set_xlabel("band")
    ax.set_ylabel("weight")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("fusion weights")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def convergence_figure(trace: Sequence[float], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(np.arange(len(trace)), trace, marker=".", markersize=3, color="#30507a")
    ax.set_xlabel("accepted step")
    ax.set_ylabel("objective")
    ax.set_title("restoration convergence")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
