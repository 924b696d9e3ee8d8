"""Emission and reception models for the serialized camera link.

Two modes share one reception treatment (clock drift resampling, complex
white noise, additive clock-tone offset):

* NRZ physical - bits become a +/-1 zero-order-hold waveform at the bit
  rate; one spectral band is masked out, shifted to baseband around the
  band center, and resampled at the receiver rate.  This is the faithful
  route: what the receiver sees is the band-limited bit activity, not
  pixel intensity.
* Bit-group analytic - each pixel's wire time carries an envelope
  amplitude w_msb*(code>>2)/255 + w_lsb*(code&3)/3, blanking at zero.
  This provable envelope is what lets image-level claims (collisions,
  fusion gains) be tested exactly.

Receiver time runs on the SDR clock; the emitter clock is faster by the
drift factor, so receiver sample m reads emitted bit position
m*(bit_rate/sample_rate)*(1+drift).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .csi2 import GROUP_BYTES, PIXEL_BITS, LineTiming, PacketStream, unpack_raw10
from .iq import IqTrace

MSB_SCALE = 255.0  # top 8 bits of a 10-bit code
LSB_SCALE = 3.0    # bottom 2 bits


class EmissionMode(enum.Enum):
    NRZ_PHYSICAL = "nrz"
    BITGROUP_ANALYTIC = "bitgroup"


@dataclass(frozen=True)
class EmissionConfig:
    """Reception-side parameters shared by all bands of one capture."""

    bands: tuple[tuple[float, float], ...]
    sdr_sample_rate_hz: float
    noise_sigma: float = 0.0
    clock_offset: float = 0.0
    drift_ppm: float = 0.0
    mode: EmissionMode = EmissionMode.NRZ_PHYSICAL
    bitgroup_weights: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if not self.bands:
            raise ValueError("need at least one band")
        for f_low, f_high in self.bands:
            if not (0.0 <= f_low < f_high):
                raise ValueError(f"band edges must satisfy 0 <= f_low < f_high, got ({f_low}, {f_high})")
        if not self.sdr_sample_rate_hz > 0:
            raise ValueError("sdr_sample_rate_hz must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.mode is EmissionMode.BITGROUP_ANALYTIC:
            if len(self.bitgroup_weights) != len(self.bands):
                raise ValueError("bitgroup_weights must provide one (w_msb, w_lsb) pair per band")


def drift_factor(drift_ppm: float) -> float:
    return 1.0 + drift_ppm * 1e-6


def bit_to_sample(
    bit_index: float, bit_rate_hz: float, sample_rate_hz: float, drift_ppm: float = 0.0
) -> int:
    """First receiver sample whose read position reaches ``bit_index``."""
    step = (bit_rate_hz / sample_rate_hz) * drift_factor(drift_ppm)
    return int(np.ceil(bit_index / step - 1e-9))


def _sample_positions(n_bits: int, timing: LineTiming, cfg: EmissionConfig) -> np.ndarray:
    """Emitted bit position read by each receiver sample."""
    step = (timing.bit_rate_hz / cfg.sdr_sample_rate_hz) * drift_factor(cfg.drift_ppm)
    n_samples = int(np.floor((n_bits - 1) / step)) + 1
    if n_samples < 1:
        raise ValueError("stream too short for one receiver sample")
    return np.arange(n_samples, dtype=np.float64) * step


def output_sample_count(n_bits: int, timing: LineTiming, cfg: EmissionConfig) -> int:
    """Receiver samples produced for ``n_bits`` emitted bits (drift included)."""
    step = (timing.bit_rate_hz / cfg.sdr_sample_rate_hz) * drift_factor(cfg.drift_ppm)
    return int(np.floor((n_bits - 1) / step)) + 1


def _receive(clean: np.ndarray, cfg: EmissionConfig, seed: int, band_index: int) -> IqTrace:
    """Apply the shared noise + offset treatment and wrap as a trace."""
    rng = np.random.default_rng([seed, band_index])
    noise = cfg.noise_sigma * (
        rng.standard_normal(clean.size) + 1j * rng.standard_normal(clean.size)
    )
    f_low, f_high = cfg.bands[band_index]
    return IqTrace(
        samples=clean + noise + cfg.clock_offset,
        sample_rate_hz=cfg.sdr_sample_rate_hz,
        center_frequency_hz=0.5 * (f_low + f_high),
    )


def _nrz_band(stream: PacketStream, timing: LineTiming, cfg: EmissionConfig, band_index: int) -> np.ndarray:
    f_low, f_high = cfg.bands[band_index]
    nyquist = timing.bit_rate_hz / 2.0
    if f_high > nyquist * (1 + 1e-12):
        raise ValueError(f"band ({f_low}, {f_high}) exceeds the bit-waveform Nyquist {nyquist}")
    levels = stream.bits.astype(np.float64) * 2.0 - 1.0
    n = levels.size
    spectrum = scipy.fft.fft(levels)
    k_low = int(np.ceil(f_low / timing.bit_rate_hz * n - 1e-9))
    k_high = int(np.floor(f_high / timing.bit_rate_hz * n + 1e-9))
    k_high = min(k_high, n // 2)
    masked = np.zeros_like(spectrum)
    # one-sided mask; interior bins doubled so the analytic envelope keeps
    # the real passband amplitude (DC and Nyquist have no mirror)
    lo = max(k_low, 0)
    if lo <= k_high:
        masked[lo : k_high + 1] = spectrum[lo : k_high + 1] * 2.0
        if lo == 0:
            masked[0] = spectrum[0]
        if n % 2 == 0 and k_high == n // 2:
            masked[n // 2] = spectrum[n // 2]
    analytic = scipy.fft.ifft(masked)
    f_center = 0.5 * (f_low + f_high)
    baseband = analytic * np.exp(
        -2j * np.pi * f_center / timing.bit_rate_hz * np.arange(n)
    )
    pos = _sample_positions(n, timing, cfg)
    grid = np.arange(n, dtype=np.float64)
    return np.interp(pos, grid, baseband.real) + 1j * np.interp(pos, grid, baseband.imag)


def _bitgroup_band(
    stream: PacketStream, timing: LineTiming, cfg: EmissionConfig, band_index: int
) -> np.ndarray:
    w_msb, w_lsb = cfg.bitgroup_weights[band_index]
    geom = stream.geometry
    pay_off = geom.header_bits
    trail_off = pay_off + geom.payload_bits_per_line

    amp = np.zeros(geom.total_bits, dtype=np.float64)
    for k in range(geom.n_frames):
        base = k * geom.bits_per_frame + geom.frame_blank_bits
        block = stream.bits[base : base + geom.active_bits_per_frame].reshape(
            geom.height_px, geom.bits_per_line
        )
        payload = np.packbits(block[:, pay_off:trail_off], axis=1)
        codes = unpack_raw10(payload.reshape(-1)).reshape(geom.height_px, -1)
        px_amp = w_msb * (codes >> 2) / MSB_SCALE + w_lsb * (codes & 0x3) / LSB_SCALE
        frame_amp = np.zeros((geom.height_px, geom.bits_per_line), dtype=np.float64)
        frame_amp[:, :pay_off] = block[:, :pay_off]
        frame_amp[:, pay_off:trail_off] = np.repeat(px_amp, PIXEL_BITS, axis=1)
        frame_amp[:, trail_off : trail_off + geom.trailer_bits] = block[
            :, trail_off : trail_off + geom.trailer_bits
        ]
        amp[base : base + geom.active_bits_per_frame] = frame_amp.reshape(-1)

    # integrate-and-dump: each receiver sample averages the amplitude over
    # its own bit interval.  Point-sampling would alias the alternating
    # sync bits (10 bits advance per sample keeps their parity for long
    # stretches), making whole headers vanish under drift.
    pos = _sample_positions(geom.total_bits, timing, cfg)
    step = (timing.bit_rate_hz / cfg.sdr_sample_rate_hz) * drift_factor(cfg.drift_ppm)
    cum = np.concatenate(([0.0], np.cumsum(amp)))
    grid = np.arange(amp.size + 1, dtype=np.float64)
    hi_pos = np.minimum(pos + step, float(amp.size))
    lo = np.interp(pos, grid, cum)
    hi = np.interp(hi_pos, grid, cum)
    width = np.maximum(hi_pos - pos, 1e-12)
    return ((hi - lo) / width).astype(np.complex128)


def simulate_band(
    stream: PacketStream,
    timing: LineTiming,
    cfg: EmissionConfig,
    band_index: int,
    seed: int = 0,
) -> IqTrace:
    """Simulate the receiver-side trace for one band of the capture."""
    if not 0 <= band_index < len(cfg.bands):
        raise ValueError(f"band_index {band_index} out of range")
    if cfg.mode is EmissionMode.NRZ_PHYSICAL:
        clean = _nrz_band(stream, timing, cfg, band_index)
    else:
        clean = _bitgroup_band(stream, timing, cfg, band_index)
    return _receive(clean, cfg, seed, band_index)


def simulate_all(
    stream: PacketStream, timing: LineTiming, cfg: EmissionConfig, seed: int = 0
) -> list[IqTrace]:
    """Simulate every configured band; noise streams are band-independent."""
    return [simulate_band(stream, timing, cfg, i, seed=seed) for i in range(len(cfg.bands))]
