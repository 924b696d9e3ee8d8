"""Camera-link framing: RAW10 byte packing and line/frame packetization.

The serialized stream for one frame is

    [frame blank] [line 0] [line 1] ... [line H-1]
    line = [header sync] [payload bytes, MSB first] [trailer sync] [line blank]

Blanking bits are zeros; sync patterns are the fixed alternating
``1010...`` sequence.  The frame blank precedes every frame (including
the first) so each frame start is a blanking-to-active transition.

RAW10 packs four 10-bit pixels into five bytes: the four high bytes
carry bits 9..2 of each pixel, the fifth byte carries the four 2-bit
remainders, pixel 0 in its lowest bits.  Grayscale values that differ
only in those two low bits therefore collide in the first four bytes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .image import GrayImage

PIXEL_BITS = 10          # one RAW10 pixel on the wire
GROUP_PIXELS = 4         # pixels per packed group
GROUP_BYTES = 5          # bytes per packed group
MAX_CODE = 1023


class Modality(enum.Enum):
    PRINT = "print"
    VEIN = "vein"


@dataclass(frozen=True)
class LineTiming:
    """Bit-level timing constants for one serialized line."""

    bit_rate_hz: float
    header_bits: int = 64
    trailer_bits: int = 64
    line_blank_bits: int = 0
    frame_blank_bits: int = 0

    def __post_init__(self) -> None:
        if not self.bit_rate_hz > 0:
            raise ValueError(f"bit_rate_hz must be positive, got {self.bit_rate_hz}")
        for name in ("header_bits", "trailer_bits", "line_blank_bits", "frame_blank_bits"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def default_line_timing(width_px: int, bit_rate_hz: float) -> LineTiming:
    """Spec-default timing: 64-bit syncs, 25% payload line blank, 4-line frame blank."""
    payload_bits = padded_width(width_px) * PIXEL_BITS
    line_blank = payload_bits // 4
    line_bits = 64 + payload_bits + 64 + line_blank
    return LineTiming(
        bit_rate_hz=bit_rate_hz,
        header_bits=64,
        trailer_bits=64,
        line_blank_bits=line_blank,
        frame_blank_bits=4 * line_bits,
    )


@dataclass(frozen=True)
class FrameGeometry:
    """Derived layout constants for a packetized capture."""

    width_px: int
    height_px: int
    n_frames: int
    header_bits: int
    trailer_bits: int
    line_blank_bits: int
    frame_blank_bits: int

    @property
    def padded_width_px(self) -> int:
        return padded_width(self.width_px)

    @property
    def payload_bits_per_line(self) -> int:
        return self.padded_width_px * PIXEL_BITS

    @property
    def bits_per_line(self) -> int:
        return (
            self.header_bits
            + self.payload_bits_per_line
            + self.trailer_bits
            + self.line_blank_bits
        )

    @property
    def bits_per_frame(self) -> int:
        return self.frame_blank_bits + self.height_px * self.bits_per_line

    @property
    def total_bits(self) -> int:
        return self.n_frames * self.bits_per_frame

    @property
    def active_bits_per_frame(self) -> int:
        return self.height_px * self.bits_per_line


@dataclass(frozen=True)
class PacketStream:
    """Serialized bit stream plus the layout indices into it."""

    bits: np.ndarray
    line_starts: np.ndarray          # first payload bit of each line
    frame_starts: np.ndarray         # first bit of each frame (its line 0 header)
    modality_schedule: tuple[Modality, ...]
    geometry: FrameGeometry

    def __post_init__(self) -> None:
        for name in ("bits", "line_starts", "frame_starts"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name)))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.bits.size and not np.all((self.bits == 0) | (self.bits == 1)):
            raise ValueError("bits must be 0/1")
        if len(self.modality_schedule) != self.frame_starts.size:
            raise ValueError("modality_schedule length must match frame count")


def quantize10(image: GrayImage) -> np.ndarray:
    """Round [0, 1] intensities to 10-bit codes."""
    return np.rint(image.pixels * MAX_CODE).astype(np.uint16)


def padded_width(width_px: int) -> int:
    """Width after right-padding to a whole number of RAW10 groups."""
    return -(-width_px // GROUP_PIXELS) * GROUP_PIXELS


def pack_raw10(pixels: np.ndarray) -> np.ndarray:
    """Pack 10-bit pixel values (length a multiple of 4) into RAW10 bytes.

    Out-of-range values saturate to the 10-bit limits.
    """
    arr = np.asarray(pixels)
    if arr.ndim != 1 or arr.size % GROUP_PIXELS != 0:
        raise ValueError(f"pixel count must be a positive multiple of {GROUP_PIXELS}")
    codes = np.clip(arr.astype(np.int64), 0, MAX_CODE).astype(np.uint16)
    groups = codes.reshape(-1, GROUP_PIXELS)
    out = np.empty((groups.shape[0], GROUP_BYTES), dtype=np.uint8)
    out[:, :GROUP_PIXELS] = (groups >> 2).astype(np.uint8)
    lsb = (groups & 0x3).astype(np.uint8)
    out[:, GROUP_PIXELS] = lsb[:, 0] | (lsb[:, 1] << 2) | (lsb[:, 2] << 4) | (lsb[:, 3] << 6)
    return out.reshape(-1)


def unpack_raw10(data: np.ndarray) -> np.ndarray:
    """Invert :func:`pack_raw10`; byte count must be a multiple of 5."""
    arr = np.asarray(data)
    if arr.ndim != 1 or arr.size % GROUP_BYTES != 0:
        raise ValueError(f"byte count must be a positive multiple of {GROUP_BYTES}")
    groups = arr.astype(np.uint16).reshape(-1, GROUP_BYTES)
    lsb_byte = groups[:, GROUP_PIXELS]
    pixels = np.empty((groups.shape[0], GROUP_PIXELS), dtype=np.uint16)
    for i in range(GROUP_PIXELS):
        pixels[:, i] = (groups[:, i] << 2) | ((lsb_byte >> (2 * i)) & 0x3)
    return pixels.reshape(-1)


def sync_pattern(n_bits: int) -> np.ndarray:
    """The fixed alternating sync sequence 1,0,1,0,..."""
    pattern = np.zeros(n_bits, dtype=np.uint8)
    pattern[0::2] = 1
    return pattern


def packetize(
    frames: Sequence[GrayImage],
    timing: LineTiming,
    schedule: str = "alternating",
) -> PacketStream:
    """Serialize frames into the bit stream described in the module docstring.

    ``schedule`` is ``"alternating"`` (print on even frame indices, vein on
    odd) or ``"single"`` (print only).  Rows are right-padded with zero
    pixels to a whole number of RAW10 groups.
    """
    if not frames:
        raise ValueError("need at least one frame")
    h, w = frames[0].height, frames[0].width
    for f in frames:
        if (f.height, f.width) != (h, w):
            raise ValueError("all frames must share dimensions")
    if schedule == "alternating":
        labels = tuple(Modality.PRINT if k % 2 == 0 else Modality.VEIN for k in range(len(frames)))
    elif schedule == "single":
        labels = tuple(Modality.PRINT for _ in frames)
    else:
        raise ValueError(f"unknown schedule {schedule!r}")

    geom = FrameGeometry(
        width_px=w,
        height_px=h,
        n_frames=len(frames),
        header_bits=timing.header_bits,
        trailer_bits=timing.trailer_bits,
        line_blank_bits=timing.line_blank_bits,
        frame_blank_bits=timing.frame_blank_bits,
    )
    header = sync_pattern(timing.header_bits)
    trailer = sync_pattern(timing.trailer_bits)
    pay_off = timing.header_bits
    trail_off = pay_off + geom.payload_bits_per_line

    bits = np.zeros(geom.total_bits, dtype=np.uint8)
    for k, frame in enumerate(frames):
        codes = np.zeros((h, geom.padded_width_px), dtype=np.uint16)
        codes[:, :w] = quantize10(frame)
        packed = pack_raw10(codes.reshape(-1)).reshape(h, -1)
        payload_bits = np.unpackbits(packed, axis=1)  # MSB first
        frame_bits = np.zeros((h, geom.bits_per_line), dtype=np.uint8)
        frame_bits[:, :pay_off] = header
        frame_bits[:, pay_off:trail_off] = payload_bits
        frame_bits[:, trail_off : trail_off + timing.trailer_bits] = trailer
        base = k * geom.bits_per_frame + timing.frame_blank_bits
        bits[base : base + geom.active_bits_per_frame] = frame_bits.reshape(-1)

    frame_starts = (
        np.arange(len(frames), dtype=np.int64) * geom.bits_per_frame + timing.frame_blank_bits
    )
    line_index = np.arange(len(frames) * h, dtype=np.int64)
    line_starts = (
        (line_index // h) * geom.bits_per_frame
        + timing.frame_blank_bits
        + (line_index % h) * geom.bits_per_line
        + timing.header_bits
    )
    return PacketStream(
        bits=bits,
        line_starts=line_starts,
        frame_starts=frame_starts,
        modality_schedule=labels,
        geometry=geom,
    )
