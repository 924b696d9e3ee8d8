"""Complex baseband traces and their on-disk form.

A capture is a pair of files sharing one stem: ``<name>.iq`` holds
interleaved little-endian float32 I,Q samples, ``<name>.meta`` is a
key=value sidecar with the four capture fields.  Floats in the sidecar
are written with repr() so values survive a round trip bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

META_SUFFIX = ".meta"
_META_KEYS = ("center_frequency_hz", "sample_rate_hz", "gain_db", "device_label")


class IqFormatError(ValueError):
    """Raised for malformed capture files or sidecars."""


@dataclass(frozen=True)
class CaptureMeta:
    """Sidecar metadata for one capture."""

    center_frequency_hz: float
    sample_rate_hz: float
    gain_db: float = 0.0
    device_label: str = ""

    def __post_init__(self) -> None:
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if "\n" in self.device_label:
            raise ValueError("device_label must be a single line")


@dataclass(frozen=True)
class IqTrace:
    """Complex baseband samples at a fixed rate.

    Samples are complex128 and frozen after construction; transforms
    return new traces rather than mutating.
    """

    samples: np.ndarray
    sample_rate_hz: float
    center_frequency_hz: float = 0.0
    origin_timestamp: int | None = None

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.samples, dtype=np.complex128))
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ValueError("samples must be finite")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def _iq_path(path: str | Path) -> Path:
    p = Path(path)
    return p if p.suffix == ".iq" else p.with_suffix(".iq")


def meta_path_for(path: str | Path) -> Path:
    return _iq_path(path).with_suffix(META_SUFFIX)


def write_iq(trace: IqTrace, path: str | Path, meta: CaptureMeta | None = None) -> Path:
    """Write ``<stem>.iq`` plus its ``.meta`` sidecar; returns the .iq path.

    When ``meta`` is omitted the sidecar is derived from the trace with
    gain 0 dB and an empty device label.  A failed write leaves no
    partial file behind.
    """
    iq_path = _iq_path(path)
    if meta is None:
        meta = CaptureMeta(
            center_frequency_hz=trace.center_frequency_hz,
            sample_rate_hz=trace.sample_rate_hz,
        )
    interleaved = np.empty(2 * trace.samples.size, dtype="<f4")
    interleaved[0::2] = trace.samples.real
    interleaved[1::2] = trace.samples.imag
    payload = interleaved.tobytes()
    sidecar = "".join(f"{k}={_format_value(getattr(meta, k))}\n" for k in _META_KEYS)

    for target, blob in ((iq_path, payload), (meta_path_for(iq_path), sidecar.encode())):
        try:
            with open(target, "wb") as fh:
                fh.write(blob)
        except OSError:
            for made in (iq_path, meta_path_for(iq_path)):
                if made.exists():
                    try:
                        os.unlink(made)
                    except OSError:
                        pass
            raise
    return iq_path


def read_meta(path: str | Path) -> CaptureMeta:
    """Parse the ``.meta`` sidecar belonging to ``path``."""
    mpath = meta_path_for(path)
    if not mpath.exists():
        raise IqFormatError(f"missing sidecar {mpath}")
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(mpath.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if "=" not in line:
            raise IqFormatError(f"{mpath}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value
    missing = [k for k in _META_KEYS if k not in fields]
    if missing:
        raise IqFormatError(f"{mpath}: missing keys {missing}")
    unknown = [k for k in fields if k not in _META_KEYS]
    if unknown:
        raise IqFormatError(f"{mpath}: unknown keys {unknown}")
    try:
        return CaptureMeta(
            center_frequency_hz=float(fields["center_frequency_hz"]),
            sample_rate_hz=float(fields["sample_rate_hz"]),
            gain_db=float(fields["gain_db"]),
            device_label=fields["device_label"],
        )
    except ValueError as exc:
        raise IqFormatError(f"{mpath}: {exc}") from exc


def read_iq(path: str | Path) -> IqTrace:
    """Load a capture; rate and center frequency come from the sidecar."""
    iq_path = _iq_path(path)
    if not iq_path.exists():
        raise IqFormatError(f"no such capture {iq_path}")
    meta = read_meta(iq_path)
    blob = iq_path.read_bytes()
    if len(blob) == 0:
        raise IqFormatError(f"{iq_path}: empty capture")
    if len(blob) % 8 != 0:
        # one complex sample = 2 * float32 = 8 bytes
        raise IqFormatError(f"{iq_path}: truncated payload ({len(blob)} bytes)")
    interleaved = np.frombuffer(blob, dtype="<f4")
    if not np.all(np.isfinite(interleaved)):
        raise IqFormatError(f"{iq_path}: non-finite sample values")
    samples = interleaved[0::2].astype(np.float64) + 1j * interleaved[1::2].astype(np.float64)
    return IqTrace(
        samples=samples,
        sample_rate_hz=meta.sample_rate_hz,
        center_frequency_hz=meta.center_frequency_hz,
    )


def _format_value(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
