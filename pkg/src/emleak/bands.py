"""Two-stage triage of candidate spectral bands.

Stage 1 works on the raw capture: energy, spectral entropy, and the
envelope autocorrelation peak separate structured leakage from flat
noise.  Stage 2 rasterizes the survivors and checks that the result
looks like an image (histogram entropy, edge content) rather than a
periodic artifact.  Thresholds come from a noise-only calibration run:
90th percentile of energy and autocorrelation peak, 10th percentile of
spectral entropy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.fft

from .image import GrayImage
from .iq import IqTrace
from .metrics import edge_intensity, histogram_entropy
from .raster import (
    Interpolation,
    NominalTiming,
    RasterParams,
    SyncError,
    average_frames,
    detect_sync,
    envelope,
    free_run_sync,
    normalized_autocorr,
)

CALIBRATION_PERCENTILES = (90.0, 90.0, 10.0)
# Stage-2 floors: a raster of pure noise or of a constant field scores
# near zero on both; a recovered card sits comfortably above.
DEFAULT_IMAGE_ENTROPY_MIN = 0.5
DEFAULT_EDGE_MIN = 0.005

SpectrumSource = Callable[[float, float], IqTrace]


class Verdict(enum.Enum):
    ACCEPTED = "accepted"
    REJECTED_STAGE1 = "rejected_stage1"
    REJECTED_STAGE2 = "rejected_stage2"


@dataclass(frozen=True)
class BandStats:
    """Stage-1 statistics of one candidate band."""

    energy: float
    spectral_entropy: float
    autocorr_peak: float


@dataclass(frozen=True)
class ImageStats:
    entropy: float
    edge_intensity: float


@dataclass(frozen=True)
class Thresholds:
    energy_min: float
    autocorr_min: float
    spectral_entropy_max: float
    image_entropy_min: float = DEFAULT_IMAGE_ENTROPY_MIN
    edge_min: float = DEFAULT_EDGE_MIN


@dataclass(frozen=True)
class BandReport:
    """Outcome for one scanned band.

    ``image_stats`` (and ``image``) are present exactly when the band
    survived stage 1; a stage-1 reject is never rasterized.
    """

    band_index: int
    f_low_hz: float
    f_high_hz: float
    verdict: Verdict
    stats: BandStats | None
    image_stats: ImageStats | None = None
    image: GrayImage | None = None
    diagnostic: str | None = None

    def __post_init__(self) -> None:
        has_image_stats = self.image_stats is not None
        if has_image_stats == (self.verdict is Verdict.REJECTED_STAGE1):
            raise ValueError("image stats are present exactly for bands that pass stage 1")


@dataclass(frozen=True)
class ReconSettings:
    """How scan turns a surviving band into a stage-2 image."""

    raster: RasterParams
    smooth: int = 1
    theta_blank: float | None = None
    use_otsu: bool = False
    min_gap_samples: int | None = None
    nominal: NominalTiming | None = None

    @staticmethod
    def basic(out_width: int, out_height: int, frames: int = 1) -> "ReconSettings":
        return ReconSettings(
            raster=RasterParams(
                out_width=out_width,
                out_height=out_height,
                frames_to_average=frames,
                interpolation=Interpolation.LINEAR,
            )
        )


def band_stats(trace: IqTrace) -> BandStats:
    """Stage-1 statistics: energy, spectral entropy, autocorrelation peak.

    Spectral entropy is computed over the FFT power distribution in
    nats; the autocorrelation peak is the largest unbiased envelope
    autocorrelation over lags 1..N/2, clamped to [0, 1].
    """
    samples = trace.samples
    energy = float(np.sum(np.abs(samples) ** 2))

    power = np.abs(scipy.fft.fft(samples)) ** 2
    total = float(power.sum())
    if total > 0.0:
        q = power / total
        q = q[q > 0.0]
        spectral_entropy = float(-np.sum(q * np.log(q)))
    else:
        spectral_entropy = 0.0

    env = np.abs(samples)
    max_lag = len(env) // 2
    if max_lag >= 1:
        r = normalized_autocorr(env, max_lag)
        peak = float(np.max(r[1:])) if r.size > 1 else 0.0
    else:
        peak = 0.0
    return BandStats(
        energy=energy,
        spectral_entropy=spectral_entropy,
        autocorr_peak=float(np.clip(peak, 0.0, 1.0)),
    )


def calibrate_thresholds(
    noise_traces: Sequence[IqTrace],
    percentiles: tuple[float, float, float] = CALIBRATION_PERCENTILES,
    image_entropy_min: float = DEFAULT_IMAGE_ENTROPY_MIN,
    edge_min: float = DEFAULT_EDGE_MIN,
) -> Thresholds:
    """Derive stage-1 thresholds from noise-only captures."""
    if not noise_traces:
        raise ValueError("calibration needs at least one noise trace")
    stats = [band_stats(t) for t in noise_traces]
    p_energy, p_auto, p_entropy = percentiles
    return Thresholds(
        energy_min=float(np.percentile([s.energy for s in stats], p_energy)),
        autocorr_min=float(np.percentile([s.autocorr_peak for s in stats], p_auto)),
        spectral_entropy_max=float(
            np.percentile([s.spectral_entropy for s in stats], p_entropy)
        ),
        image_entropy_min=image_entropy_min,
        edge_min=edge_min,
    )


def stage1_pass(stats: BandStats, thresholds: Thresholds) -> bool:
    return (
        stats.energy > thresholds.energy_min
        and stats.autocorr_peak > thresholds.autocorr_min
        and stats.spectral_entropy < thresholds.spectral_entropy_max
    )


def _stage2_image(trace: IqTrace, recon: ReconSettings) -> tuple[GrayImage | None, str | None]:
    env = envelope(trace, smooth=recon.smooth)
    try:
        sync = detect_sync(
            env,
            trace.sample_rate_hz,
            theta_blank=recon.theta_blank,
            use_otsu=recon.use_otsu,
            min_gap_samples=recon.min_gap_samples,
            nominal=recon.nominal,
        )
        frames = min(recon.raster.frames_to_average, sync.n_frames)
        return average_frames(env, sync, recon.raster, frame_indices=range(frames)), None
    except SyncError as exc:
        note = f"sync fallback ({exc})"
    except Exception as exc:  # pragma: no cover - defensive
        note = f"sync fallback ({exc})"
    try:
        sync = free_run_sync(env, recon.raster.out_height)
        params = RasterParams(
            out_width=recon.raster.out_width,
            out_height=recon.raster.out_height,
            frames_to_average=1,
            interpolation=recon.raster.interpolation,
        )
        return average_frames(env, sync, params), note
    except Exception as exc:
        return None, f"{note}; free-run failed ({exc})"


def scan(
    spectrum_source: SpectrumSource,
    f_range_hz: tuple[float, float],
    band_width_hz: float,
    thresholds: Thresholds,
    recon: ReconSettings,
) -> list[BandReport]:
    """Sweep a frequency range in contiguous bands and triage each one.

    The range is partitioned from its low edge; a final band that would
    extend past the high edge is dropped.  Reports come back in
    frequency order.  A failing spectrum source rejects that band at
    stage 1 with the error recorded, rather than aborting the sweep.
    """
    f_min, f_max = f_range_hz
    if not (f_min < f_max):
        raise ValueError("frequency range must satisfy f_min < f_max")
    if band_width_hz <= 0.0:
        raise ValueError("band_width_hz must be positive")
    n_bands = int((f_max - f_min) / band_width_hz + 1e-9)
    reports: list[BandReport] = []
    for i in range(n_bands):
        f_low = f_min + i * band_width_hz
        f_high = f_low + band_width_hz
        try:
            trace = spectrum_source(f_low, f_high)
        except Exception as exc:
            reports.append(
                BandReport(
                    band_index=i,
                    f_low_hz=f_low,
                    f_high_hz=f_high,
                    verdict=Verdict.REJECTED_STAGE1,
                    stats=None,
                    diagnostic=f"spectrum source failed ({exc})",
                )
            )
            continue
        stats = band_stats(trace)
        if not stage1_pass(stats, thresholds):
            reports.append(
                BandReport(
                    band_index=i,
                    f_low_hz=f_low,
                    f_high_hz=f_high,
                    verdict=Verdict.REJECTED_STAGE1,
                    stats=stats,
                )
            )
            continue
        image, diagnostic = _stage2_image(trace, recon)
        if image is None:
            reports.append(
                BandReport(
                    band_index=i,
                    f_low_hz=f_low,
                    f_high_hz=f_high,
                    verdict=Verdict.REJECTED_STAGE2,
                    stats=stats,
                    image_stats=ImageStats(entropy=0.0, edge_intensity=0.0),
                    diagnostic=diagnostic,
                )
            )
            continue
        image_stats = ImageStats(
            entropy=histogram_entropy(image),
            edge_intensity=edge_intensity(image),
        )
        accepted = (
            image_stats.entropy > thresholds.image_entropy_min
            and image_stats.edge_intensity > thresholds.edge_min
        )
        reports.append(
            BandReport(
                band_index=i,
                f_low_hz=f_low,
                f_high_hz=f_high,
                verdict=Verdict.ACCEPTED if accepted else Verdict.REJECTED_STAGE2,
                stats=stats,
                image_stats=image_stats,
                image=image,
                diagnostic=diagnostic,
            )
        )
    return reports


def accepted_bands(reports: Sequence[BandReport]) -> list[BandReport]:
    return [r for r in reports if r.verdict is Verdict.ACCEPTED]
