"""Raster reconstruction from an envelope: sync detection and sampling.

The receiver has no protocol decoder, only the envelope.  Blanking
intervals sit near zero, so the indicator env < theta_blank segments the
stream; frame starts are the first active sample after a long blanking
run, and the line period comes from the envelope autocorrelation (or
from nominal timing when the attacker knows the mode line).

Clock drift makes nominal timing disagree with the observed frame
spacing.  With nominal timing supplied, the fitted frame period yields
the drift estimate and a corrected line period; without it the drift is
unobservable from the starts alone and reported as zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft

from .csi2 import FrameGeometry
from .emission import bit_to_sample, drift_factor
from .image import GrayImage, normalized
from .iq import IqTrace

THETA_PERCENTILES = (5.0, 50.0)   # theta_blank = midpoint of these envelope percentiles
MIN_LINE_LAG = 4                  # shortest lag considered a line period
SUBMULTIPLE_MAX = 8               # harmonics checked when refining the autocorr peak
SUBMULTIPLE_RATIO = 0.8           # acceptance ratio for a shorter-lag peak
LONG_BASELINE_MULT = 16           # periods spanned when sharpening the line-period estimate
HYSTERESIS_RATIO = 0.6            # lower rail for frame-start refinement, as a fraction of theta
MIN_CONTENT_RUN = 3               # phases of sustained cross-line deviation that count as payload


class SyncError(RuntimeError):
    """Raised when the envelope exposes no usable frame structure."""


class Interpolation(enum.Enum):
    NEAREST = "nearest"
    LINEAR = "linear"


@dataclass(frozen=True)
class RasterParams:
    out_width: int
    out_height: int
    frames_to_average: int = 1
    interpolation: Interpolation = Interpolation.LINEAR

    def __post_init__(self) -> None:
        if self.out_width < 1 or self.out_height < 1:
            raise ValueError("output dimensions must be positive")
        if self.frames_to_average < 1:
            raise ValueError("frames_to_average must be >= 1")


@dataclass(frozen=True)
class NominalTiming:
    """Receiver-assumed timing, in SDR samples at the nominal clock."""

    line_period_samples: float
    frame_period_samples: float
    payload_offset_samples: float = 0.0
    payload_span_samples: float | None = None


@dataclass(frozen=True)
class SyncModel:
    """Detected or constructed synchronization state for one capture.

    ``fitted_intercept`` is the sub-sample position of frame 0 from the
    least-squares line through the detected starts; when present the
    raster places frame k at ``fitted_intercept + k * frame_period``
    instead of the integer-snapped detection, which removes the
    per-frame +-1 sample jitter that would otherwise blur an average.
    """

    line_period_samples: float
    frame_period_samples: float
    theta_blank: float
    drift_estimate: float
    frame_starts: np.ndarray
    payload_offset_samples: float = 0.0
    payload_span_samples: float | None = None
    fitted_intercept: float | None = None

    def __post_init__(self) -> None:
        starts = np.ascontiguousarray(np.asarray(self.frame_starts, dtype=np.int64))
        starts.setflags(write=False)
        object.__setattr__(self, "frame_starts", starts)
        if self.line_period_samples <= 0 or self.frame_period_samples <= 0:
            raise ValueError("periods must be positive")
        if starts.size == 0:
            raise ValueError("need at least one frame start")
        if np.any(np.diff(starts) <= 0):
            raise ValueError("frame_starts must be strictly increasing")

    @property
    def n_frames(self) -> int:
        return self.frame_starts.size


def envelope(trace: IqTrace | np.ndarray, smooth: int = 1) -> np.ndarray:
    """Magnitude envelope, optionally smoothed by a zero-padded moving average."""
    samples = trace.samples if isinstance(trace, IqTrace) else np.asarray(trace)
    env = np.abs(samples).astype(np.float64)
    if smooth < 1:
        raise ValueError("smoothing width must be >= 1")
    if smooth > 1:
        env = np.convolve(env, np.ones(smooth) / smooth, mode="same")
    return env


def normalized_autocorr(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Per-lag unbiased autocorrelation of ``x`` normalized by its variance.

    Returns r[0..max_lag] clamped to [-1, 1]; a zero-variance input
    yields all zeros by convention.
    """
    arr = np.asarray(x, dtype=np.float64)
    n = arr.size
    if not 0 < max_lag < n:
        raise ValueError(f"max_lag must be in (0, {n})")
    centered = arr - arr.mean()
    nfft = scipy.fft.next_fast_len(2 * n)
    spectrum = scipy.fft.rfft(centered, nfft)
    raw = scipy.fft.irfft(np.abs(spectrum) ** 2, nfft)[: max_lag + 1]
    variance = raw[0] / n
    if variance <= 0.0:
        return np.zeros(max_lag + 1)
    counts = n - np.arange(max_lag + 1, dtype=np.float64)
    return np.clip((raw / counts) / variance, -1.0, 1.0)


def otsu_threshold(env: np.ndarray, bins: int = 256) -> float:
    """Otsu's between-class-variance threshold on the envelope histogram."""
    counts, edges = np.histogram(env, bins=bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    weights = counts.astype(np.float64)
    total = weights.sum()
    w0 = np.cumsum(weights)
    w1 = total - w0
    m = np.cumsum(weights * centers)
    mu0 = np.divide(m, w0, out=np.zeros_like(m), where=w0 > 0)
    mu1 = np.divide(m[-1] - m, w1, out=np.zeros_like(m), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    return float(centers[int(np.argmax(between))])


def default_theta_blank(env: np.ndarray) -> float:
    lo, hi = np.percentile(env, THETA_PERCENTILES)
    theta = float(0.5 * (lo + hi))
    # majority-blank captures drag the median -- and with it theta -- into
    # the noise floor; the histogram split still separates floor from body
    # there, so fall back when theta lands far below it
    split = otsu_threshold(env)
    if theta <= float(env.min()) or theta < 0.5 * split:
        theta = split
    return theta


def _blank_runs(blank: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start index and length of each maximal True run."""
    padded = np.concatenate(([False], blank, [False]))
    delta = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(delta == 1)
    ends = np.flatnonzero(delta == -1)
    return starts, ends - starts


def _refine_starts(
    starts: np.ndarray, env: np.ndarray, theta_blank: float, min_gap_samples: int
) -> np.ndarray:
    """Walk each start backward over threshold-straddling edge samples.

    The active body opens barely above theta (header amplitude sits a
    couple of noise sigmas over it), so its first sample or two can dip
    below theta while staying far above the gap floor.  Absorbing the
    contiguous stretch above ``HYSTERESIS_RATIO * theta_blank`` right
    before each start removes that late bias without letting gap noise
    (which lives near zero) pull starts early.  The walk never consumes
    a whole qualifying gap.
    """
    theta_low = HYSTERESIS_RATIO * theta_blank
    refined = np.array(starts, dtype=np.int64)
    for i, s in enumerate(refined):
        limit = max(int(s) - (min_gap_samples - 1), 0)
        s = int(s)
        while s > limit and env[s - 1] >= theta_low:
            s -= 1
        refined[i] = s
    return refined


def _payload_window(
    env: np.ndarray,
    intercept: float,
    line_period: float,
    frame_period: float,
    n_frames: int,
    frame_gap: float,
    theta_blank: float,
) -> tuple[float, float | None]:
    """Estimate the intra-line payload window from the folded envelope.

    Every full line of every frame folds onto the line period, giving a
    per-phase mean and a per-phase deviation across lines.  Phases whose
    mean sits below theta are the line blanking; the rest split into
    framing overhead (identical on every line, so deviation stays at the
    noise level) and payload (rows differ, so deviation carries image
    content).  When the content split finds nothing -- a uniform image,
    say -- the whole active span is returned, and with no usable line
    structure the window stays (0, None), i.e. the full line.
    """
    width = int(line_period)
    lines = int(max((frame_period - frame_gap) // line_period, 0.0))
    if width < 4 or lines < 2:
        return 0.0, None
    # anchor on the fitted start line, not the per-frame detections: their
    # one-sample jitter would smear every plateau edge across lines
    fitted = intercept + frame_period * np.arange(n_frames, dtype=np.float64)
    bases = (
        fitted[:, None] + np.arange(lines, dtype=np.float64)[None, :] * line_period
    ).reshape(-1)
    pos = bases[:, None] + np.arange(width, dtype=np.float64)[None, :]
    pos = pos[pos[:, -1] <= env.size - 1]
    if pos.shape[0] < 2:
        return 0.0, None
    # interpolated folding: integer rounding would alias the plateau edges
    # into spurious cross-line deviation
    folded = np.interp(pos, np.arange(env.size, dtype=np.float64), env)
    profile = folded.mean(axis=0)
    deviation = folded.std(axis=0)

    below = profile < theta_blank
    if np.all(below):
        return 0.0, None
    if np.any(below):
        # blanking may wrap the phase origin when starts jitter by a
        # sample, so hunt for the longest below-theta run circularly
        run_starts, run_lengths = _blank_runs(np.concatenate([below, below]))
        in_first = run_starts < width
        run_starts = run_starts[in_first]
        run_lengths = np.minimum(run_lengths[in_first], width)
        k = int(np.argmax(run_lengths))
        blank_len = int(run_lengths[k])
        active_start = (int(run_starts[k]) + blank_len) % width
        active_len = width - blank_len
        # the deviation floor must come from the blanking run itself: dim
        # payload columns can also sit below theta, and their cross-line
        # deviation is content, not noise
        blank_phases = (int(run_starts[k]) + np.arange(blank_len)) % width
        noise_dev = float(np.median(deviation[blank_phases]))
    else:
        active_start, active_len = 0, width
        noise_dev = 0.0

    active = (active_start + np.arange(active_len)) % width
    prof_a = profile[active]
    hot = deviation[active] > max(2.0 * noise_dev, 1e-12)
    # a lone hot phase is a plateau edge blurring across lines, not content
    hot_starts, hot_lengths = _blank_runs(hot)
    solid = hot_lengths >= MIN_CONTENT_RUN
    if np.any(solid):
        first = int(hot_starts[solid][0])
        last = int(hot_starts[solid][-1] + hot_lengths[solid][-1] - 1)
        # threshold-straddling edge phases blur a fraction of a payload
        # sample into the framing; their deviation is a shadow of the
        # core's, so shave them (at most the straddle width per side)
        core = float(np.median(deviation[active[first : last + 1]]))
        for _ in range(2):
            if last > first and deviation[active[first]] < 0.5 * core:
                first += 1
            if last > first and deviation[active[last]] < 0.5 * core:
                last -= 1
        # constant image columns show no cross-line deviation; reclaim them
        # by extending while the level stays off the framing plateau
        level_tol = max(3.0 * noise_dev, 1e-12)
        if first > 0:
            framing = float(np.median(prof_a[:first]))
            while first > 0 and abs(prof_a[first - 1] - framing) > level_tol:
                first -= 1
        if last < active_len - 1:
            framing = float(np.median(prof_a[last + 1 :]))
            while last < active_len - 1 and abs(prof_a[last + 1] - framing) > level_tol:
                last += 1
    else:
        first, last = 0, active_len - 1
    offset = float((active_start + first) % width)
    return offset, float(last - first + 1)


def _dominant_lag(env: np.ndarray, lag_min: int, lag_max: int) -> float:
    """Dominant autocorrelation lag with sub-multiple and parabolic refinement."""
    r = normalized_autocorr(env, lag_max)
    if lag_min >= r.size - 1:
        raise SyncError("envelope too short for line-period search")
    search = r[lag_min:lag_max]
    if search.size == 0 or not np.any(search > 0):
        raise SyncError("no periodic structure in envelope autocorrelation")
    peak = lag_min + int(np.argmax(search))
    # the global peak may sit on a multiple of the true period; prefer the
    # shortest sub-multiple whose peak is nearly as strong
    for k in range(SUBMULTIPLE_MAX, 1, -1):
        cand = int(round(peak / k))
        if cand < lag_min:
            continue
        lo = max(cand - 2, lag_min)
        hi = min(cand + 3, lag_max)
        local = lo + int(np.argmax(r[lo:hi]))
        if r[local] >= SUBMULTIPLE_RATIO * r[peak]:
            peak = local
            break
    period = _parabolic_refine(r, peak)
    # the vertex at the fundamental lag is biased by image content (row-to-row
    # correlation is not symmetric around one line); re-refining at m periods
    # divides that bias by m
    m = min(LONG_BASELINE_MULT, int((r.size - 10) // max(period, 1.0)))
    if m >= 2:
        target = int(round(m * period))
        lo = max(target - 8, peak + 1)
        hi = min(target + 9, r.size - 1)
        if lo < hi:
            k = lo + int(np.argmax(r[lo:hi]))
            if r[k] > 0:
                period = _parabolic_refine(r, k) / m
    return period


def _parabolic_refine(r: np.ndarray, k: int) -> float:
    if k <= 0 or k >= r.size - 1:
        return float(k)
    denom = r[k - 1] - 2.0 * r[k] + r[k + 1]
    if denom == 0.0:
        return float(k)
    delta = 0.5 * (r[k - 1] - r[k + 1]) / denom
    return float(k) + float(np.clip(delta, -0.5, 0.5))


def detect_sync(
    env: np.ndarray,
    sample_rate_hz: float,
    *,
    theta_blank: float | None = None,
    use_otsu: bool = False,
    min_gap_samples: int | None = None,
    nominal: NominalTiming | None = None,
) -> SyncModel:
    """Recover frame starts, periods, and drift from an envelope.

    Frame starts are the first sample at or above theta_blank after a
    blanking run of at least ``min_gap_samples`` (default: half the
    longest observed run, which separates frame gaps from line gaps),
    refined backward over edge samples that straddle the threshold (see
    ``_refine_starts``).
    With ``nominal`` timing the fitted frame period yields a drift
    estimate and a corrected line period plus payload window; without it
    drift is zero and the line period comes from the autocorrelation.
    """
    env = np.asarray(env, dtype=np.float64)
    if env.size < 4:
        raise SyncError("envelope too short")
    if theta_blank is None:
        theta_blank = otsu_threshold(env) if use_otsu else default_theta_blank(env)
    blank = env < theta_blank
    run_starts, run_lengths = _blank_runs(blank)
    if run_starts.size == 0:
        raise SyncError(f"no blanking interval below theta_blank={theta_blank:g}")
    if min_gap_samples is None:
        min_gap_samples = max(int(run_lengths.max() // 2), 1)
    qualifying = run_lengths >= min_gap_samples
    starts = run_starts[qualifying] + run_lengths[qualifying]
    starts = starts[starts < env.size]  # a trailing blank run opens no frame
    if starts.size < 2:
        raise SyncError(f"{starts.size} frame start(s) found, need at least 2")
    starts = _refine_starts(starts, env, theta_blank, min_gap_samples)

    index = np.arange(starts.size, dtype=np.float64)
    slope, intercept = np.polyfit(index, starts.astype(np.float64), 1)
    frame_period = float(slope)
    if frame_period <= 0:
        raise SyncError("non-increasing frame starts")

    if nominal is not None:
        drift = nominal.frame_period_samples / frame_period - 1.0
        factor = 1.0 + drift
        return SyncModel(
            line_period_samples=nominal.line_period_samples / factor,
            frame_period_samples=frame_period,
            theta_blank=float(theta_blank),
            drift_estimate=drift,
            frame_starts=starts,
            payload_offset_samples=nominal.payload_offset_samples / factor,
            payload_span_samples=(
                None
                if nominal.payload_span_samples is None
                else nominal.payload_span_samples / factor
            ),
            fitted_intercept=float(intercept),
        )

    lag_max = min(int(frame_period * 0.9), env.size // 2)
    line_period = _dominant_lag(env, MIN_LINE_LAG, max(lag_max, MIN_LINE_LAG + 1))
    frame_gap = float(run_lengths.max())
    payload_offset, payload_span = _payload_window(
        env, float(intercept), line_period, frame_period, starts.size, frame_gap, float(theta_blank)
    )
    return SyncModel(
        line_period_samples=line_period,
        frame_period_samples=frame_period,
        theta_blank=float(theta_blank),
        drift_estimate=0.0,
        frame_starts=starts,
        payload_offset_samples=payload_offset,
        payload_span_samples=payload_span,
        fitted_intercept=float(intercept),
    )


def sync_from_geometry(
    geom: FrameGeometry,
    bit_rate_hz: float,
    sample_rate_hz: float,
    n_frames: int | None = None,
    drift_ppm: float = 0.0,
) -> SyncModel:
    """Exact ground-truth sync for a simulated capture (tests and closed loop)."""
    n = geom.n_frames if n_frames is None else n_frames
    step = sample_rate_hz / (bit_rate_hz * drift_factor(drift_ppm))
    starts = np.array(
        [
            bit_to_sample(
                k * geom.bits_per_frame + geom.frame_blank_bits,
                bit_rate_hz,
                sample_rate_hz,
                drift_ppm,
            )
            for k in range(n)
        ],
        dtype=np.int64,
    )
    return SyncModel(
        line_period_samples=geom.bits_per_line * step,
        frame_period_samples=geom.bits_per_frame * step,
        theta_blank=0.0,
        drift_estimate=drift_ppm * 1e-6,
        frame_starts=starts,
        payload_offset_samples=geom.header_bits * step,
        payload_span_samples=geom.payload_bits_per_line * step,
        fitted_intercept=geom.frame_blank_bits * step,
    )


def nominal_from_geometry(
    geom: FrameGeometry, bit_rate_hz: float, sample_rate_hz: float
) -> NominalTiming:
    """Receiver-assumed timing at the nominal (undrifted) clock."""
    step = sample_rate_hz / bit_rate_hz
    return NominalTiming(
        line_period_samples=geom.bits_per_line * step,
        frame_period_samples=geom.bits_per_frame * step,
        payload_offset_samples=geom.header_bits * step,
        payload_span_samples=geom.payload_bits_per_line * step,
    )


def extrapolate_sync(sync: SyncModel, nominal: NominalTiming, n_frames: int) -> SyncModel:
    """Drift-uncorrected baseline: nominal-period extrapolation from the first start.

    This reproduces the failure mode of trusting nominal timing over a
    long capture; use against the detected model to show what drift
    correction buys.
    """
    starts = sync.frame_starts[0] + np.rint(
        np.arange(n_frames) * nominal.frame_period_samples
    ).astype(np.int64)
    return SyncModel(
        line_period_samples=nominal.line_period_samples,
        frame_period_samples=nominal.frame_period_samples,
        theta_blank=sync.theta_blank,
        drift_estimate=0.0,
        frame_starts=starts,
        payload_offset_samples=nominal.payload_offset_samples,
        payload_span_samples=nominal.payload_span_samples,
        fitted_intercept=float(sync.frame_starts[0]),
    )


def free_run_sync(env: np.ndarray, out_height: int) -> SyncModel:
    """Last-resort sync with no blanking structure: free-running raster from 0.

    The line period is the dominant envelope periodicity when one
    exists, else an even division of the capture; used by the scanner so
    every band yields an image for stage-2 statistics.
    """
    env = np.asarray(env, dtype=np.float64)
    try:
        line_period = _dominant_lag(env, MIN_LINE_LAG, max(env.size // 2, MIN_LINE_LAG + 1))
    except (SyncError, ValueError):
        line_period = 0.0
    if line_period <= 0:
        line_period = max(env.size / (out_height * 2.0), 1.0)
    if line_period * out_height > env.size:
        line_period = env.size / out_height  # clamp so one frame always fits
    frame_period = line_period * out_height
    n_frames = max(int(env.size // frame_period), 1)
    starts = np.rint(np.arange(n_frames) * frame_period).astype(np.int64)
    return SyncModel(
        line_period_samples=line_period,
        frame_period_samples=frame_period,
        theta_blank=default_theta_blank(env),
        drift_estimate=0.0,
        frame_starts=starts,
        fitted_intercept=0.0,
    )


def _line_positions(sync: SyncModel, params: RasterParams, frame_index: int) -> np.ndarray:
    if sync.fitted_intercept is not None:
        frame_origin = sync.fitted_intercept + frame_index * sync.frame_period_samples
    else:
        frame_origin = float(sync.frame_starts[frame_index])
    start = frame_origin + sync.payload_offset_samples
    span = (
        sync.payload_span_samples
        if sync.payload_span_samples is not None
        else sync.line_period_samples
    )
    rows = start + np.arange(params.out_height, dtype=np.float64) * sync.line_period_samples
    cols = (np.arange(params.out_width, dtype=np.float64) + 0.5) * (span / params.out_width) - 0.5
    return rows[:, None] + cols[None, :]


def _sample_env(env: np.ndarray, pos: np.ndarray, interpolation: Interpolation) -> np.ndarray:
    n = env.size
    if pos.max() > n - 0.5 or pos.min() < -0.5:
        raise SyncError("raster extends beyond the capture")
    if interpolation is Interpolation.NEAREST:
        # round half UP, not half-to-even: detected starts sit half a
        # sample past the true edge on average, and banker's rounding
        # would dither that knife edge pixel by pixel
        idx = np.clip(np.floor(pos + 0.5).astype(np.int64), 0, n - 1)
        return env[idx]
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, n - 1)
    i1 = np.minimum(i0 + 1, n - 1)
    frac = np.clip(pos - i0, 0.0, 1.0)
    return env[i0] * (1.0 - frac) + env[i1] * frac


def rasterize_raw(
    env: np.ndarray, sync: SyncModel, params: RasterParams, frame_index: int
) -> np.ndarray:
    """Unnormalized raster of one frame (the linear working surface)."""
    if not 0 <= frame_index < sync.n_frames:
        raise ValueError(f"frame_index {frame_index} out of range [0, {sync.n_frames})")
    env = np.asarray(env, dtype=np.float64)
    pos = _line_positions(sync, params, frame_index)
    return _sample_env(env, pos, params.interpolation)


def rasterize(
    env: np.ndarray, sync: SyncModel, params: RasterParams, frame_index: int
) -> GrayImage:
    """Raster one frame and min-max normalize it to [0, 1]."""
    return normalized(rasterize_raw(env, sync, params, frame_index))


def average_frames_raw(
    env: np.ndarray,
    sync: SyncModel,
    params: RasterParams,
    frame_indices: np.ndarray | None = None,
) -> np.ndarray:
    """Mean unnormalized raster over the chosen frames (default: the first
    ``frames_to_average`` available)."""
    if frame_indices is None:
        n = min(params.frames_to_average, sync.n_frames)
        frame_indices = np.arange(n)
    frame_indices = np.asarray(frame_indices, dtype=np.int64)
    if frame_indices.size == 0:
        raise ValueError("no frames to average")
    acc = np.zeros((params.out_height, params.out_width))
    for k in frame_indices:
        acc += rasterize_raw(env, sync, params, int(k))
    return acc / frame_indices.size


def average_frames(
    env: np.ndarray,
    sync: SyncModel,
    params: RasterParams,
    frame_indices: np.ndarray | None = None,
) -> GrayImage:
    """Frame-averaged reconstruction, normalized once after averaging.

    Averaging happens on the linear envelope surface so noise falls as
    1/sqrt(N); a single normalization at the end keeps per-frame noise
    extremes out of the gain.
    """
    return normalized(average_frames_raw(env, sync, params, frame_indices))


def manual_sync(
    env: np.ndarray,
    line_period_samples: float,
    frame_period_samples: float,
    theta_blank: float,
) -> SyncModel:
    """Sync from operator-supplied periods.

    The first sample at or above ``theta_blank`` anchors frame 0; later
    starts extrapolate at the given frame period (drift is the
    operator's problem here).
    """
    env = np.asarray(env, dtype=np.float64)
    if line_period_samples <= 0 or frame_period_samples <= 0:
        raise ValueError("periods must be positive")
    above = np.flatnonzero(env >= theta_blank)
    first = int(above[0]) if above.size else 0
    n_frames = max(int((env.size - first) // frame_period_samples), 1)
    starts = first + np.rint(
        np.arange(n_frames) * frame_period_samples
    ).astype(np.int64)
    return SyncModel(
        line_period_samples=float(line_period_samples),
        frame_period_samples=float(frame_period_samples),
        theta_blank=float(theta_blank),
        drift_estimate=0.0,
        frame_starts=starts,
        fitted_intercept=float(first),
    )
