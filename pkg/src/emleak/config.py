"""Run configuration: strict INI parsing plus a canonical hash.

Every key is typed and checked; unknown sections or keys are errors
(a typo must never silently fall back to a default).  The hash covers
the parsed values, so formatting, comments, and key order do not
affect it, while any semantic change does.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .emission import EmissionConfig, EmissionMode


class ConfigError(ValueError):
    pass


_MODES = {"nrz": EmissionMode.NRZ_PHYSICAL, "bitgroup": EmissionMode.BITGROUP_ANALYTIC}
_SCHEDULES = ("alternating", "single")
_SYNC_MODES = ("nominal", "auto")
_INTERPOLATIONS = ("nearest", "linear")
_FORWARDS = ("identity", "blur3")
_PARITIES = ("auto", "0", "1")


@dataclass(frozen=True)
class RunSection:
    seed: int
    out_dir: str
    figures: bool


@dataclass(frozen=True)
class CardsSection:
    print_path: str
    vein_path: str
    width: int
    height: int


@dataclass(frozen=True)
class SimulateSection:
    mode: EmissionMode
    bit_rate_hz: float
    sdr_sample_rate_hz: float
    frames: int
    schedule: str
    header_bits: int
    trailer_bits: int
    line_blank_bits: int
    frame_blank_bits: int
    noise_sigma: float
    clock_offset: float
    drift_ppm: float
    bands: tuple[tuple[float, float], ...]
    bitgroup_weights: tuple[tuple[float, float], ...]

    def emission_config(self) -> EmissionConfig:
        return EmissionConfig(
            bands=self.bands,
            sdr_sample_rate_hz=self.sdr_sample_rate_hz,
            noise_sigma=self.noise_sigma,
            clock_offset=self.clock_offset,
            drift_ppm=self.drift_ppm,
            mode=self.mode,
            bitgroup_weights=self.bitgroup_weights
            if self.mode is EmissionMode.BITGROUP_ANALYTIC
            else (),
        )


@dataclass(frozen=True)
class ScanSection:
    f_min_hz: float
    f_max_hz: float
    band_width_hz: float
    calibrate_traces: int
    image_entropy_min: float
    edge_min: float


@dataclass(frozen=True)
class ReconstructSection:
    out_width: int
    out_height: int
    frames_to_average: int
    interpolation: str
    smooth: int
    sync: str
    theta_blank: float | None


@dataclass(frozen=True)
class DemuxSection:
    parity: str


@dataclass(frozen=True)
class FuseSection:
    lam: float
    tau: float
    v_target: float | None  # None: derive from the uniform region
    window: int
    var_threshold: float


@dataclass(frozen=True)
class RestoreSection:
    lam: float
    iterations: int
    forward: str
    noise_sigma: float


@dataclass(frozen=True)
class RunConfig:
    run: RunSection
    cards: CardsSection
    simulate: SimulateSection
    scan: ScanSection
    reconstruct: ReconstructSection
    demux: DemuxSection
    fuse: FuseSection
    restore: RestoreSection
    config_hash: str


class _Section:
    """One INI section with typed getters and leftover-key detection."""

    def __init__(self, name: str, raw: dict[str, str]):
        self.name = name
        self.raw = dict(raw)
        self.parsed: dict[str, object] = {}

    def _take(self, key: str, default: str | None) -> str | None:
        if key in self.raw:
            return self.raw.pop(key)
        if default is None:
            raise ConfigError(f"[{self.name}] is missing required key '{key}'")
        return default

    def get_str(self, key: str, default: str | None = None, choices: tuple[str, ...] | None = None) -> str:
        value = str(self._take(key, default)).strip()
        if choices is not None and value not in choices:
            raise ConfigError(f"[{self.name}] {key} must be one of {choices}, got '{value}'")
        self.parsed[key] = value
        return value

    def get_int(self, key: str, default: str | None = None) -> int:
        text = self._take(key, default)
        try:
            value = int(str(text).strip())
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key} must be an integer, got '{text}'") from exc
        self.parsed[key] = value
        return value

    def get_float(self, key: str, default: str | None = None) -> float:
        text = self._take(key, default)
        try:
            value = float(str(text).strip())
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key} must be a number, got '{text}'") from exc
        self.parsed[key] = value
        return value

    def get_opt_float(self, key: str, default: str = "") -> float | None:
        text = str(self._take(key, default)).strip()
        if text in ("", "auto"):
            self.parsed[key] = None
            return None
        try:
            value = float(text)
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key} must be a number or 'auto'") from exc
        self.parsed[key] = value
        return value

    def get_bool(self, key: str, default: str) -> bool:
        text = str(self._take(key, default)).strip().lower()
        if text in ("true", "yes", "1", "on"):
            value = True
        elif text in ("false", "no", "0", "off"):
            value = False
        else:
            raise ConfigError(f"[{self.name}] {key} must be a boolean, got '{text}'")
        self.parsed[key] = value
        return value

    def get_pairs(self, key: str, default: str) -> tuple[tuple[float, float], ...]:
        text = str(self._take(key, default)).strip()
        pairs = []
        for chunk in text.split(","):
            parts = chunk.strip().split(":")
            if len(parts) != 2:
                raise ConfigError(f"[{self.name}] {key} entries must look like 'a:b'")
            try:
                pairs.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ConfigError(f"[{self.name}] {key} has a non-numeric entry") from exc
        if not pairs:
            raise ConfigError(f"[{self.name}] {key} must not be empty")
        self.parsed[key] = [list(p) for p in pairs]
        return tuple(pairs)

    def finish(self) -> None:
        if self.raw:
            unknown = ", ".join(sorted(self.raw))
            raise ConfigError(f"[{self.name}] has unknown keys: {unknown}")


_KNOWN_SECTIONS = (
    "run",
    "cards",
    "simulate",
    "scan",
    "reconstruct",
    "demux",
    "fuse",
    "restore",
)


def load_config(path: str | Path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    text = Path(path).read_text(encoding="utf-8")
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for section in parser.sections():
        if section not in _KNOWN_SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
    if "run" not in parser:
        raise ConfigError("missing required section [run]")

    sections = {
        name: _Section(name, dict(parser[name]) if name in parser else {})
        for name in _KNOWN_SECTIONS
    }

    s = sections["run"]
    run = RunSection(
        seed=s.get_int("seed"),  # required: runs must be reproducible on purpose
        out_dir=s.get_str("out_dir", "out"),
        figures=s.get_bool("figures", "false"),
    )

    s = sections["cards"]
    cards = CardsSection(
        print_path=s.get_str("print", ""),
        vein_path=s.get_str("vein", ""),
        width=s.get_int("width", "64"),
        height=s.get_int("height", "64"),
    )

    s = sections["simulate"]
    mode_name = s.get_str("mode", "bitgroup", choices=tuple(_MODES))
    simulate = SimulateSection(
        mode=_MODES[mode_name],
        bit_rate_hz=s.get_float("bit_rate_hz", "1e6"),
        sdr_sample_rate_hz=s.get_float("sdr_sample_rate_hz", "1e5"),
        frames=s.get_int("frames", "32"),
        schedule=s.get_str("schedule", "alternating", choices=_SCHEDULES),
        header_bits=s.get_int("header_bits", "60"),
        trailer_bits=s.get_int("trailer_bits", "60"),
        line_blank_bits=s.get_int("line_blank_bits", "160"),
        frame_blank_bits=s.get_int("frame_blank_bits", "3680"),
        noise_sigma=s.get_float("noise_sigma", "0.05"),
        clock_offset=s.get_float("clock_offset", "0.0"),
        drift_ppm=s.get_float("drift_ppm", "50.0"),
        bands=s.get_pairs("bands", "50000:150000,150000:250000"),
        bitgroup_weights=s.get_pairs("bitgroup_weights", "1:0,0:1"),
    )

    s = sections["scan"]
    scan = ScanSection(
        f_min_hz=s.get_float("f_min_hz", "50000"),
        f_max_hz=s.get_float("f_max_hz", "450000"),
        band_width_hz=s.get_float("band_width_hz", "100000"),
        calibrate_traces=s.get_int("calibrate_traces", "8"),
        image_entropy_min=s.get_float("image_entropy_min", "0.5"),
        edge_min=s.get_float("edge_min", "0.005"),
    )

    s = sections["reconstruct"]
    reconstruct = ReconstructSection(
        out_width=s.get_int("out_width", "64"),
        out_height=s.get_int("out_height", "64"),
        frames_to_average=s.get_int("frames_to_average", "8"),
        interpolation=s.get_str("interpolation", "nearest", choices=_INTERPOLATIONS),
        smooth=s.get_int("smooth", "1"),
        sync=s.get_str("sync", "nominal", choices=_SYNC_MODES),
        theta_blank=s.get_opt_float("theta_blank"),
    )

    s = sections["demux"]
    demux = DemuxSection(parity=s.get_str("parity", "auto", choices=_PARITIES))

    s = sections["fuse"]
    fuse = FuseSection(
        lam=s.get_float("lambda", "0.1"),
        tau=s.get_float("tau", "0.0"),
        v_target=s.get_opt_float("v_target", "auto"),
        window=s.get_int("window", "7"),
        var_threshold=s.get_float("var_threshold", "0.001"),
    )

    s = sections["restore"]
    restore = RestoreSection(
        lam=s.get_float("lambda", "0.05"),
        iterations=s.get_int("iterations", "80"),
        forward=s.get_str("forward", "identity", choices=_FORWARDS),
        noise_sigma=s.get_float("noise_sigma", "0.0"),
    )

    for section in sections.values():
        section.finish()

    canonical = {name: sections[name].parsed for name in _KNOWN_SECTIONS}
    digest = hashlib.sha256(
        json.dumps(canonical, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()

    return RunConfig(
        run=run,
        cards=cards,
        simulate=simulate,
        scan=scan,
        reconstruct=reconstruct,
        demux=demux,
        fuse=fuse,
        restore=restore,
        config_hash=digest,
    )
