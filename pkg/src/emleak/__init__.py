"""Study toolkit for electromagnetic leakage of serialized camera links.

The package follows the capture path end to end: serialize a frame the
way the wire does (:mod:`~emleak.csi2`), model what a nearby receiver
sees (:mod:`~emleak.emission`), find and vet the leaking bands
(:mod:`~emleak.bands`), rebuild the raster (:mod:`~emleak.raster`),
split the interleaved modalities (:mod:`~emleak.demux`), fuse the
per-band views (:mod:`~emleak.fusion`), and clean up the result
(:mod:`~emleak.restore`).  :mod:`~emleak.cli` drives it all from
config files.
"""

__version__ = "0.1.0"

from .bands import (
    BandReport,
    BandStats,
    ImageStats,
    ReconSettings,
    Thresholds,
    Verdict,
    band_stats,
    calibrate_thresholds,
    scan,
)
from .cards import (
    low_contrast_ramp_card,
    palm_print_card,
    palm_vein_card,
    ramp_card,
)
from .csi2 import (
    FrameGeometry,
    LineTiming,
    Modality,
    PacketStream,
    default_line_timing,
    pack_raw10,
    packetize,
    quantize10,
    unpack_raw10,
)
from .demux import DemuxResult, ParityDecision, assignment_error, auto_parity, demux, misalignment_error
from .emission import EmissionConfig, EmissionMode, simulate_all, simulate_band
from .fusion import (
    FusionProblem,
    FusionWeights,
    amplitude_threshold,
    default_v_target,
    fuse,
    fusion_objective,
    project_simplex,
    segment_uniform,
)
from .image import GrayImage, ImageFormatError, normalized, read_image, write_image
from .iq import CaptureMeta, IqFormatError, IqTrace, read_iq, write_iq
from .metrics import (
    MetricReport,
    distinct_levels,
    edge_intensity,
    histogram_entropy,
    metric_report,
    psnr,
    ssim,
)
from .raster import (
    Interpolation,
    NominalTiming,
    RasterParams,
    SyncError,
    SyncModel,
    average_frames,
    detect_sync,
    envelope,
    rasterize,
)
from .restore import (
    ForwardModel,
    PriorKind,
    PriorSpec,
    RestorationError,
    RestorationProblem,
    restore,
    total_variation,
)

__all__ = [
    "__version__",
    "BandReport",
    "BandStats",
    "CaptureMeta",
    "DemuxResult",
    "EmissionConfig",
    "EmissionMode",
    "ForwardModel",
    "FrameGeometry",
    "FusionProblem",
    "FusionWeights",
    "GrayImage",
    "ImageFormatError",
    "ImageStats",
    "Interpolation",
    "IqFormatError",
    "IqTrace",
    "LineTiming",
    "MetricReport",
    "Modality",
    "NominalTiming",
    "PacketStream",
    "ParityDecision",
    "PriorKind",
    "PriorSpec",
    "RasterParams",
    "ReconSettings",
    "RestorationError",
    "RestorationProblem",
    "SyncError",
    "SyncModel",
    "Thresholds",
    "Verdict",
    "amplitude_threshold",
    "assignment_error",
    "auto_parity",
    "average_frames",
    "band_stats",
    "calibrate_thresholds",
    "default_line_timing",
    "default_v_target",
    "demux",
    "detect_sync",
    "distinct_levels",
    "edge_intensity",
    "envelope",
    "fuse",
    "fusion_objective",
    "histogram_entropy",
    "low_contrast_ramp_card",
    "metric_report",
    "misalignment_error",
    "normalized",
    "pack_raw10",
    "packetize",
    "palm_print_card",
    "palm_vein_card",
    "project_simplex",
    "psnr",
    "quantize10",
    "ramp_card",
    "rasterize",
    "read_image",
    "read_iq",
    "restore",
    "scan",
    "segment_uniform",
    "simulate_all",
    "simulate_band",
    "ssim",
    "total_variation",
    "unpack_raw10",
    "write_image",
    "write_iq",
]
