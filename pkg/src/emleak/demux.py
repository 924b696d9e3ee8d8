"""Dual-modality separation by frame parity.

Interleaved capture alternates surface (print) and subsurface (vein)
frames, so the receiver splits detected frames by index parity and
averages each group.  Parity is counted from the first *detected*
frame: losing the true first frame flips the labels, which is exactly
what the misalignment error quantifies and what auto_parity guards
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import GrayImage, normalized
from .raster import RasterParams, SyncModel, average_frames_raw, rasterize_raw

VARIANCE_GAP_WARN = 0.05  # grouping explains less than this share of frame variance


@dataclass(frozen=True)
class DemuxResult:
    print_image: GrayImage
    vein_image: GrayImage
    n_print: int
    n_vein: int
    parity_offset: int

    def __post_init__(self) -> None:
        if abs(self.n_print - self.n_vein) > 1:
            raise ValueError("modality frame counts may differ by at most one")
        if self.parity_offset not in (0, 1):
            raise ValueError("parity_offset must be 0 or 1")


@dataclass(frozen=True)
class ParityDecision:
    """auto_parity outcome: chosen offset plus a confidence signal."""

    parity: int
    warning: bool
    variance_gap: float


def _frame_indices(sync: SyncModel, params: RasterParams) -> np.ndarray:
    n_use = min(2 * params.frames_to_average, sync.n_frames)
    if n_use < 2:
        raise ValueError("demultiplexing needs at least 2 detected frames")
    return np.arange(n_use, dtype=np.int64)


def demux(
    env: np.ndarray, sync: SyncModel, params: RasterParams, parity_offset: int = 0
) -> DemuxResult:
    """Average even-parity frames into print, odd-parity into vein.

    ``frames_to_average`` counts frames per modality; each modality
    image is normalized after its own averaging.
    """
    if parity_offset not in (0, 1):
        raise ValueError("parity_offset must be 0 or 1")
    idx = _frame_indices(sync, params)
    is_print = (idx + parity_offset) % 2 == 0
    print_raw = average_frames_raw(env, sync, params, frame_indices=idx[is_print])
    vein_raw = average_frames_raw(env, sync, params, frame_indices=idx[~is_print])
    return DemuxResult(
        print_image=normalized(print_raw),
        vein_image=normalized(vein_raw),
        n_print=int(np.count_nonzero(is_print)),
        n_vein=int(np.count_nonzero(~is_print)),
        parity_offset=parity_offset,
    )


def misalignment_error(result: DemuxResult, ref_print: GrayImage, ref_vein: GrayImage) -> float:
    """Crossed-pair penalty: the squared error a one-frame misalignment costs.

    For a correctly demultiplexed result this is large (roughly twice
    the print/vein separation); for an inverted result it collapses
    toward zero.  Its direct-pair counterpart is
    :func:`assignment_error`.
    """
    return float(
        np.sum((ref_print.pixels - result.vein_image.pixels) ** 2)
        + np.sum((ref_vein.pixels - result.print_image.pixels) ** 2)
    )


def assignment_error(result: DemuxResult, ref_print: GrayImage, ref_vein: GrayImage) -> float:
    """Direct-pair reconstruction error of the labeled assignment."""
    return float(
        np.sum((ref_print.pixels - result.print_image.pixels) ** 2)
        + np.sum((ref_vein.pixels - result.vein_image.pixels) ** 2)
    )


def auto_parity(env: np.ndarray, sync: SyncModel, params: RasterParams) -> ParityDecision:
    """Choose which frame parity carries the print modality.

    Grouping quality is the share of frame variance explained by the
    even/odd split; below 5% (noise, or identical frames) the result
    carries a warning.  The label itself uses the physical asymmetry of
    the two modalities: surface texture shows stronger amplitude
    variation, so the higher-contrast group mean is taken as print.
    """
    idx = _frame_indices(sync, params)
    rasters = np.stack([rasterize_raw(env, sync, params, int(k)) for k in idx])
    group0 = rasters[0::2]
    group1 = rasters[1::2]
    mean0 = group0.mean(axis=0)
    mean1 = group1.mean(axis=0)
    mean_all = rasters.mean(axis=0)

    total = float(np.mean((rasters - mean_all) ** 2))
    within = (
        float(np.sum((group0 - mean0) ** 2) + np.sum((group1 - mean1) ** 2))
        / rasters.size
    )
    gap = 0.0 if total <= 0.0 else max(1.0 - within / total, 0.0)
    warning = gap < VARIANCE_GAP_WARN

    contrast0 = float(np.std(mean0))
    contrast1 = float(np.std(mean1))
    parity = 0 if contrast0 >= contrast1 else 1
    return ParityDecision(parity=parity, warning=warning, variance_gap=gap)
