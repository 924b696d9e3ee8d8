"""Command-line driver.

One binary, stage-per-subcommand: ``simulate`` through ``restore`` run
a single stage against files on disk, ``pipeline`` chains them from a
config, ``demo-init`` drops a ready-to-run example.  Every command
prints a tab-delimited summary to stdout; with figures enabled the
report path also renders PNGs next to the delimited output.

Exit codes: 0 success, 1 runtime failure (pipeline failures name their
stage on stderr), 2 usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bands import (
    BandReport,
    ReconSettings,
    Verdict,
    accepted_bands,
    calibrate_thresholds,
    scan,
)
from .cards import palm_print_card, palm_vein_card
from .config import ConfigError, RunConfig, load_config
from .csi2 import LineTiming, PacketStream, packetize
from .demux import ParityDecision, auto_parity, demux
from .emission import EmissionConfig, output_sample_count, simulate_band
from .fusion import (
    FusionProblem,
    default_v_target,
    fuse,
    local_variance,
    segment_uniform,
)
from .image import GrayImage, ImageFormatError, normalized, read_image, write_image
from .iq import CaptureMeta, IqFormatError, IqTrace, read_iq, write_iq
from .metrics import MetricReport, metric_report
from .raster import (
    Interpolation,
    RasterParams,
    SyncError,
    SyncModel,
    average_frames,
    detect_sync,
    envelope,
    manual_sync,
    nominal_from_geometry,
)
from .restore import (
    RestorationProblem,
    blur3,
    identity_forward,
    objective as restoration_objective,
    restore,
)

_INTERP = {"nearest": Interpolation.NEAREST, "linear": Interpolation.LINEAR}


def _fmt(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def _emit_tsv(header: list[str], rows: list[list[object]]) -> None:
    print("\t".join(header))
    for row in rows:
        print("\t".join(_fmt(v) for v in row))


def _write_tsv(path: Path, header: list[str], rows: list[list[object]]) -> None:
    lines = ["\t".join(header)]
    lines += ["\t".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# config-driven assembly


def _load_cards(cfg: RunConfig, config_dir: Path) -> tuple[GrayImage, GrayImage]:
    """Subject cards from configured paths (relative to the config file),
    or the built-in pair."""
    if cfg.cards.print_path:
        print_card = read_image(config_dir / cfg.cards.print_path)
    else:
        print_card = palm_print_card(cfg.cards.width, cfg.cards.height)
    if cfg.cards.vein_path:
        vein_card = read_image(config_dir / cfg.cards.vein_path)
    else:
        vein_card = palm_vein_card(cfg.cards.width, cfg.cards.height)
    return print_card, vein_card


def _line_timing(cfg: RunConfig) -> LineTiming:
    sim = cfg.simulate
    return LineTiming(
        bit_rate_hz=sim.bit_rate_hz,
        header_bits=sim.header_bits,
        trailer_bits=sim.trailer_bits,
        line_blank_bits=sim.line_blank_bits,
        frame_blank_bits=sim.frame_blank_bits,
    )


def _build_stream(
    cfg: RunConfig, print_card: GrayImage, vein_card: GrayImage
) -> tuple[PacketStream, LineTiming]:
    sim = cfg.simulate
    if sim.schedule == "alternating":
        frames = [print_card if k % 2 == 0 else vein_card for k in range(sim.frames)]
    else:
        frames = [print_card] * sim.frames
    timing = _line_timing(cfg)
    return packetize(frames, timing, schedule=sim.schedule), timing


def _noise_trace(sigma: float, n: int, seed_key: list[int], fs: float, f_center: float) -> IqTrace:
    rng = np.random.default_rng(seed_key)
    samples = sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return IqTrace(samples=samples, sample_rate_hz=fs, center_frequency_hz=f_center)


def _closed_loop_provider(cfg: RunConfig, stream: PacketStream, timing: LineTiming):
    """Spectrum source for scan: configured emission bands answer with the
    simulated capture, every other window with receiver noise."""
    ecfg = cfg.simulate.emission_config()
    n = output_sample_count(stream.geometry.total_bits, timing, ecfg)
    sigma = max(ecfg.noise_sigma, 1e-9)  # zero-noise runs still need a noise floor

    def provider(f_low: float, f_high: float) -> IqTrace:
        for i, (lo, hi) in enumerate(ecfg.bands):
            if abs(lo - f_low) < 1e-3 and abs(hi - f_high) < 1e-3:
                return simulate_band(stream, timing, ecfg, i, seed=cfg.run.seed)
        return _noise_trace(
            sigma,
            n,
            [cfg.run.seed, 7001, int(round(f_low))],
            ecfg.sdr_sample_rate_hz,
            0.5 * (f_low + f_high),
        )

    return provider


def _calibration_traces(cfg: RunConfig, n: int) -> list[IqTrace]:
    ecfg = cfg.simulate.emission_config()
    sigma = max(ecfg.noise_sigma, 1e-9)
    return [
        _noise_trace(sigma, n, [cfg.run.seed, 9001, i], ecfg.sdr_sample_rate_hz, 0.0)
        for i in range(cfg.scan.calibrate_traces)
    ]


def _recon_settings(cfg: RunConfig, stream: PacketStream, timing: LineTiming) -> ReconSettings:
    rc = cfg.reconstruct
    params = RasterParams(
        out_width=rc.out_width,
        out_height=rc.out_height,
        frames_to_average=rc.frames_to_average,
        interpolation=_INTERP[rc.interpolation],
    )
    nominal = None
    if rc.sync == "nominal":
        nominal = nominal_from_geometry(
            stream.geometry, timing.bit_rate_hz, cfg.simulate.sdr_sample_rate_hz
        )
    return ReconSettings(
        raster=params, smooth=rc.smooth, theta_blank=rc.theta_blank, nominal=nominal
    )


def _uniform_mask(bands: list[GrayImage], window: int, var_threshold: float) -> np.ndarray:
    """Uniform region of the highest-energy band; falls back to its
    flattest half when nothing clears the variance threshold."""
    energies = [float(np.sum(b.pixels**2)) for b in bands]
    ref = bands[int(np.argmax(energies))]
    mask = segment_uniform(ref, window=window, var_threshold=var_threshold)
    if not mask.any():
        var = local_variance(ref, window)
        mask = var <= np.median(var)
    return mask


def _canonical(image: GrayImage) -> GrayImage:
    return normalized(image.pixels, bit_depth_hint=image.bit_depth_hint)


def _report_row(modality: str, stage: str, report: MetricReport) -> list[object]:
    return [
        modality,
        stage,
        report.psnr_db,
        report.ssim,
        report.entropy_nats,
        report.edge_intensity,
    ]


def _figures_enabled(args, cfg: RunConfig) -> bool:
    return bool(getattr(args, "figures", False) or cfg.run.figures)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out or cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    print_card, vein_card = _load_cards(cfg, Path(args.config).parent)
    write_image(print_card, out / "truth_print.pgm")
    write_image(vein_card, out / "truth_vein.pgm")
    stream, timing = _build_stream(cfg, print_card, vein_card)
    ecfg = cfg.simulate.emission_config()
    rows = []
    traces = []
    for i, (f_low, f_high) in enumerate(ecfg.bands):
        trace = simulate_band(stream, timing, ecfg, i, seed=cfg.run.seed)
        traces.append(trace)
        path = write_iq(
            trace,
            out / f"band{i}.iq",
            CaptureMeta(
                center_frequency_hz=trace.center_frequency_hz,
                sample_rate_hz=trace.sample_rate_hz,
                gain_db=0.0,
                device_label=f"synthetic link, band {i}",
            ),
        )
        rows.append([i, f_low, f_high, len(trace), str(path)])
    _emit_tsv(["band", "f_low_hz", "f_high_hz", "samples", "path"], rows)
    if _figures_enabled(args, cfg):
        from . import figures

        figures.image_grid_figure(
            [("print card", print_card), ("vein card", vein_card)], out / "fig_cards.png"
        )
        figures.envelope_figure(envelope(traces[0]), out / "fig_envelope.png")
    return 0


def _scan_rows(reports: list[BandReport]) -> list[list[object]]:
    rows = []
    for r in reports:
        stats = r.stats
        image_stats = r.image_stats
        rows.append(
            [
                r.band_index,
                r.f_low_hz,
                r.f_high_hz,
                stats.energy if stats else "",
                stats.spectral_entropy if stats else "",
                stats.autocorr_peak if stats else "",
                image_stats.entropy if image_stats else "",
                image_stats.edge_intensity if image_stats else "",
                r.verdict.value,
                r.diagnostic or "",
            ]
        )
    return rows


_SCAN_HEADER = [
    "band",
    "f_low_hz",
    "f_high_hz",
    "energy",
    "spectral_entropy",
    "autocorr_peak",
    "image_entropy",
    "edge_intensity",
    "verdict",
    "diagnostic",
]


def _run_scan(cfg: RunConfig, config_dir: Path) -> tuple[list[BandReport], PacketStream, LineTiming]:
    print_card, vein_card = _load_cards(cfg, config_dir)
    stream, timing = _build_stream(cfg, print_card, vein_card)
    n = output_sample_count(stream.geometry.total_bits, timing, cfg.simulate.emission_config())
    thresholds = calibrate_thresholds(
        _calibration_traces(cfg, n),
        image_entropy_min=cfg.scan.image_entropy_min,
        edge_min=cfg.scan.edge_min,
    )
    reports = scan(
        _closed_loop_provider(cfg, stream, timing),
        (cfg.scan.f_min_hz, cfg.scan.f_max_hz),
        cfg.scan.band_width_hz,
        thresholds,
        _recon_settings(cfg, stream, timing),
    )
    return reports, stream, timing


def cmd_scan(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out or cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports, _, _ = _run_scan(cfg, Path(args.config).parent)
    rows = _scan_rows(reports)
    _emit_tsv(_SCAN_HEADER, rows)
    _write_tsv(out / "scan.tsv", _SCAN_HEADER, rows)
    for r in reports:
        if r.verdict is Verdict.ACCEPTED and r.image is not None:
            write_image(r.image, out / f"scan_band{r.band_index}.pgm")
    if _figures_enabled(args, cfg):
        from . import figures

        figures.scan_figure(reports, out / "fig_scan.png")
    return 0


def _resolve_capture(path_arg: str, band: int) -> Path:
    path = Path(path_arg)
    if path.is_dir():
        return path / f"band{band}.iq"
    return path


def _sync_from_args(args, env: np.ndarray, fs: float) -> SyncModel:
    if args.sync_manual:
        parts = args.sync_manual.split(",")
        if len(parts) != 3:
            raise ValueError("--sync-manual takes line_period,frame_period,theta_blank")
        lp, fp, theta = (float(p) for p in parts)
        return manual_sync(env, lp, fp, theta)
    return detect_sync(env, fs, theta_blank=args.theta_blank, use_otsu=args.otsu)


def _sync_row(sync: SyncModel) -> list[object]:
    return [
        sync.line_period_samples,
        sync.frame_period_samples,
        sync.theta_blank,
        sync.drift_estimate,
        sync.n_frames,
    ]


_SYNC_HEADER = [
    "line_period_samples",
    "frame_period_samples",
    "theta_blank",
    "drift_estimate",
    "frames_detected",
]


def cmd_reconstruct(args) -> int:
    trace = read_iq(_resolve_capture(args.input, args.band))
    env = envelope(trace, smooth=args.smooth)
    sync = _sync_from_args(args, env, trace.sample_rate_hz)
    params = RasterParams(
        out_width=args.width,
        out_height=args.height,
        frames_to_average=args.frames,
        interpolation=_INTERP[args.interp],
    )
    image = average_frames(env, sync, params)
    out = write_image(image, args.out)
    _emit_tsv(_SYNC_HEADER + ["out"], [_sync_row(sync) + [str(out)]])
    return 0


def cmd_demux(args) -> int:
    trace = read_iq(_resolve_capture(args.input, args.band))
    env = envelope(trace, smooth=args.smooth)
    sync = _sync_from_args(args, env, trace.sample_rate_hz)
    params = RasterParams(
        out_width=args.width,
        out_height=args.height,
        frames_to_average=args.frames,
        interpolation=_INTERP[args.interp],
    )
    if args.parity == "auto":
        decision = auto_parity(env, sync, params)
        if decision.warning:
            print(
                "warning: frame grouping explains "
                f"{decision.variance_gap:.1%} of variance; parity is a guess",
                file=sys.stderr,
            )
    else:
        decision = ParityDecision(parity=int(args.parity), warning=False, variance_gap=float("nan"))
    result = demux(env, sync, params, parity_offset=decision.parity)
    prefix = Path(args.out_prefix)
    print_path = write_image(result.print_image, prefix.with_name(prefix.name + "_print.pgm"))
    vein_path = write_image(result.vein_image, prefix.with_name(prefix.name + "_vein.pgm"))
    _emit_tsv(
        ["parity", "variance_gap", "warning", "n_print", "n_vein", "print_out", "vein_out"],
        [
            [
                result.parity_offset,
                decision.variance_gap,
                decision.warning,
                result.n_print,
                result.n_vein,
                str(print_path),
                str(vein_path),
            ]
        ],
    )
    return 0


def cmd_fuse(args) -> int:
    bands = [read_image(p) for p in args.images]
    mask = _uniform_mask(bands, args.window, args.var_threshold)
    if args.v_target == "auto":
        v_target = default_v_target(tuple(bands), mask)
    else:
        v_target = float(args.v_target)
    problem = FusionProblem(
        bands=tuple(bands),
        uniform_mask=mask,
        v_target=v_target,
        lam=args.lam,
        noise_threshold_tau=args.tau,
    )
    fused, weights = fuse(problem)
    out = write_image(fused, args.out)
    rows = [[i, w] for i, w in enumerate(weights.alpha)]
    _emit_tsv(["band", "weight"], rows)
    _emit_tsv(["v_target", "uniform_pixels", "out"], [[v_target, int(mask.sum()), str(out)]])
    if args.figures:
        from . import figures

        figures.weights_figure(weights, Path(args.out).with_suffix(".weights.png"))
    return 0


def cmd_restore(args) -> int:
    observed = read_image(args.input)
    forward = blur3() if args.forward == "blur3" else identity_forward()
    problem = RestorationProblem(
        observed=observed,
        lam=args.lam,
        noise_sigma=args.noise_sigma,
        forward=forward,
        iterations=args.iters,
    )
    trace: list[float] = []
    restored = restore(problem, objective_trace=trace)
    out = write_image(restored, args.out)
    _emit_tsv(
        ["steps", "objective_start", "objective_final", "out"],
        [[len(trace) - 1, trace[0], trace[-1], str(out)]],
    )
    if args.figures:
        from . import figures

        figures.convergence_figure(trace, Path(args.out).with_suffix(".convergence.png"))
    return 0


def cmd_metrics(args) -> int:
    recon = read_image(args.reconstruction)
    truth = read_image(args.reference)
    if args.canonical:
        recon, truth = _canonical(recon), _canonical(truth)
    report = metric_report(recon, truth)
    _emit_tsv(
        ["psnr_db", "ssim", "entropy_nats", "edge_intensity"],
        [[report.psnr_db, report.ssim, report.entropy_nats, report.edge_intensity]],
    )
    return 0


def cmd_pipeline(args) -> int:
    stage = "config"
    try:
        cfg = load_config(args.config)
        config_dir = Path(args.config).parent
        out = Path(args.out or cfg.run.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        figures_on = _figures_enabled(args, cfg)
        manifest: dict = {"config_hash": cfg.config_hash, "outputs": {}, "notes": []}

        stage = "simulate"
        print_card, vein_card = _load_cards(cfg, config_dir)
        write_image(print_card, out / "truth_print.pgm")
        write_image(vein_card, out / "truth_vein.pgm")
        manifest["outputs"]["truth_print"] = "truth_print.pgm"
        manifest["outputs"]["truth_vein"] = "truth_vein.pgm"
        stream, timing = _build_stream(cfg, print_card, vein_card)
        ecfg = cfg.simulate.emission_config()
        traces = {}
        for i, (f_low, f_high) in enumerate(ecfg.bands):
            trace = simulate_band(stream, timing, ecfg, i, seed=cfg.run.seed)
            traces[(round(f_low, 3), round(f_high, 3))] = trace
            write_iq(trace, out / f"band{i}.iq")
            manifest["outputs"][f"band{i}"] = f"band{i}.iq"
        print(f"simulate: {len(traces)} band(s), {stream.geometry.n_frames} frames")

        stage = "scan"
        n = output_sample_count(stream.geometry.total_bits, timing, ecfg)
        thresholds = calibrate_thresholds(
            _calibration_traces(cfg, n),
            image_entropy_min=cfg.scan.image_entropy_min,
            edge_min=cfg.scan.edge_min,
        )
        reports = scan(
            _closed_loop_provider(cfg, stream, timing),
            (cfg.scan.f_min_hz, cfg.scan.f_max_hz),
            cfg.scan.band_width_hz,
            thresholds,
            _recon_settings(cfg, stream, timing),
        )
        _write_tsv(out / "scan.tsv", _SCAN_HEADER, _scan_rows(reports))
        manifest["outputs"]["scan"] = "scan.tsv"
        manifest["scan"] = [
            {
                "band": r.band_index,
                "f_low_hz": r.f_low_hz,
                "f_high_hz": r.f_high_hz,
                "verdict": r.verdict.value,
            }
            for r in reports
        ]
        selected = [
            r
            for r in accepted_bands(reports)
            if (round(r.f_low_hz, 3), round(r.f_high_hz, 3)) in traces
        ]
        print(f"scan: {len(accepted_bands(reports))}/{len(reports)} band(s) accepted")
        if not selected:
            raise RuntimeError("no scanned band was accepted")

        stage = "reconstruct"
        recon = _recon_settings(cfg, stream, timing)
        params = recon.raster
        band_syncs = []
        for r in selected:
            trace = traces[(round(r.f_low_hz, 3), round(r.f_high_hz, 3))]
            env = envelope(trace, smooth=recon.smooth)
            sync = detect_sync(
                env,
                trace.sample_rate_hz,
                theta_blank=recon.theta_blank,
                nominal=recon.nominal,
            )
            band_syncs.append((r, env, sync))

        modality_bands: dict[str, list[GrayImage]] = {}
        if cfg.simulate.schedule == "alternating":
            stage = "demux"
            best = max(
                range(len(band_syncs)), key=lambda i: band_syncs[i][0].stats.energy
            )
            r_best, env_best, sync_best = band_syncs[best]
            if cfg.demux.parity == "auto":
                decision = auto_parity(env_best, sync_best, params)
                if decision.warning:
                    manifest["notes"].append(
                        "parity grouping is weak (variance gap "
                        f"{decision.variance_gap:.4f})"
                    )
            else:
                decision = ParityDecision(
                    parity=int(cfg.demux.parity), warning=False, variance_gap=float("nan")
                )
            manifest["parity"] = {
                "parity": decision.parity,
                "variance_gap": None
                if math.isnan(decision.variance_gap)
                else decision.variance_gap,
                "warning": decision.warning,
            }
            modality_bands = {"print": [], "vein": []}
            for r, env, sync in band_syncs:
                result = demux(env, sync, params, parity_offset=decision.parity)
                modality_bands["print"].append(result.print_image)
                modality_bands["vein"].append(result.vein_image)
                write_image(result.print_image, out / f"band{r.band_index}_print.pgm")
                write_image(result.vein_image, out / f"band{r.band_index}_vein.pgm")
            print(f"demux: parity {decision.parity}, {len(band_syncs)} band(s)")
        else:
            modality_bands = {"print": []}
            for r, env, sync in band_syncs:
                image = average_frames(env, sync, params)
                modality_bands["print"].append(image)
                write_image(image, out / f"band{r.band_index}_print.pgm")

        truth_by_modality = {"print": print_card, "vein": vein_card}
        metric_rows: list[list[object]] = []
        manifest["weights"] = {}
        manifest["metrics"] = {}
        restore_traces: dict[str, list[float]] = {}
        for modality, band_images in modality_bands.items():
            stage = f"fuse[{modality}]"
            mask = _uniform_mask(band_images, cfg.fuse.window, cfg.fuse.var_threshold)
            v_target = (
                cfg.fuse.v_target
                if cfg.fuse.v_target is not None
                else default_v_target(tuple(band_images), mask)
            )
            problem = FusionProblem(
                bands=tuple(band_images),
                uniform_mask=mask,
                v_target=v_target,
                lam=cfg.fuse.lam,
                noise_threshold_tau=cfg.fuse.tau,
            )
            fused, weights = fuse(problem)
            write_image(fused, out / f"fused_{modality}.pgm")
            manifest["outputs"][f"fused_{modality}"] = f"fused_{modality}.pgm"
            manifest["weights"][modality] = list(weights.alpha)

            stage = f"restore[{modality}]"
            forward = blur3() if cfg.restore.forward == "blur3" else identity_forward()
            rproblem = RestorationProblem(
                observed=fused,
                lam=cfg.restore.lam,
                noise_sigma=cfg.restore.noise_sigma,
                forward=forward,
                iterations=cfg.restore.iterations,
            )
            rtrace: list[float] = []
            restored = restore(rproblem, objective_trace=rtrace)
            restore_traces[modality] = rtrace
            write_image(restored, out / f"restored_{modality}.pgm")
            manifest["outputs"][f"restored_{modality}"] = f"restored_{modality}.pgm"

            stage = f"metrics[{modality}]"
            truth = _canonical(truth_by_modality[modality])
            fused_report = metric_report(_canonical(fused), truth)
            restored_report = metric_report(_canonical(restored), truth)
            metric_rows.append(_report_row(modality, "fused", fused_report))
            metric_rows.append(_report_row(modality, "restored", restored_report))
            manifest["metrics"][modality] = {
                "fused": dataclasses.asdict(fused_report),
                "restored": dataclasses.asdict(restored_report),
            }
            print(
                f"{modality}: fused ssim {fused_report.ssim:.4f}, "
                f"restored ssim {restored_report.ssim:.4f}"
            )

        stage = "report"
        header = ["modality", "stage", "psnr_db", "ssim", "entropy_nats", "edge_intensity"]
        _write_tsv(out / "metrics.tsv", header, metric_rows)
        manifest["outputs"]["metrics"] = "metrics.tsv"
        (out / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        if figures_on:
            from . import figures

            r0, env0, sync0 = band_syncs[0]
            figures.envelope_figure(env0, out / "fig_envelope.png", sync=sync0)
            figures.scan_figure(reports, out / "fig_scan.png")
            grid = [("truth print", print_card), ("truth vein", vein_card)]
            for modality in modality_bands:
                grid.append(
                    (f"restored {modality}", read_image(out / f"restored_{modality}.pgm"))
                )
            figures.image_grid_figure(grid, out / "fig_images.png", columns=2)
            for modality, rtrace in restore_traces.items():
                figures.convergence_figure(rtrace, out / f"fig_convergence_{modality}.png")
        _emit_tsv(header, metric_rows)
        return 0
    except Exception as exc:
        print(f"pipeline: stage {stage} failed: {exc}", file=sys.stderr)
        return 1


_DEMO_CONFIG = """\
[run]
seed = 1234
out_dir = demo_out
figures = true

[cards]
print = truth_print.pgm
vein = truth_vein.pgm

[simulate]
mode = bitgroup
bit_rate_hz = 1e6
sdr_sample_rate_hz = 1e5
frames = 32
schedule = alternating
header_bits = 60
trailer_bits = 60
line_blank_bits = 160
frame_blank_bits = 3680
noise_sigma = 0.05
clock_offset = 0.0
drift_ppm = 50.0
bands = 50000:150000,150000:250000
bitgroup_weights = 1:0,0:1

[scan]
f_min_hz = 50000
f_max_hz = 450000
band_width_hz = 100000
calibrate_traces = 8

[reconstruct]
out_width = 64
out_height = 64
frames_to_average = 16
interpolation = nearest
sync = nominal

[demux]
parity = auto

[fuse]
lambda = 0.1
v_target = auto

[restore]
lambda = 0.1
iterations = 120
forward = identity
"""


def cmd_demo_init(args) -> int:
    out = Path(args.directory)
    out.mkdir(parents=True, exist_ok=True)
    print_path = write_image(palm_print_card(args.size, args.size), out / "truth_print.pgm")
    vein_path = write_image(palm_vein_card(args.size, args.size), out / "truth_vein.pgm")
    cfg_path = out / "demo.cfg"
    cfg_path.write_text(_DEMO_CONFIG, encoding="utf-8")
    _emit_tsv(
        ["file", "role"],
        [
            [str(cfg_path), "config"],
            [str(print_path), "print card"],
            [str(vein_path), "vein card"],
        ],
    )
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_config_arg(sub) -> None:
    sub.add_argument("--config", required=True, help="run configuration (INI)")
    sub.add_argument("--out", help="output directory override")
    sub.add_argument("--figures", action="store_true", help="render figure PNGs")


def _add_capture_args(sub) -> None:
    sub.add_argument("input", help=".iq capture, or a directory holding bandN.iq")
    sub.add_argument("--band", type=int, default=0, help="band index when input is a directory")
    sub.add_argument("--width", type=int, required=True, help="output width in pixels")
    sub.add_argument("--height", type=int, required=True, help="output height in pixels")
    sub.add_argument("--frames", type=int, default=1, help="frames averaged per image")
    sub.add_argument("--interp", choices=sorted(_INTERP), default="linear")
    sub.add_argument("--smooth", type=int, default=1, help="envelope moving-average width")
    group = sub.add_mutually_exclusive_group()
    group.add_argument(
        "--sync-auto", action="store_true", help="detect sync from the envelope (default)"
    )
    group.add_argument(
        "--sync-manual",
        metavar="LP,FP,THETA",
        help="line period, frame period (samples), blanking threshold",
    )
    sub.add_argument("--theta-blank", type=float, help="override the blanking threshold")
    sub.add_argument("--otsu", action="store_true", help="threshold via Otsu instead of percentiles")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emleak",
        description="EM side-channel study pipeline for serialized camera links",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    sub = subparsers.add_parser("simulate", help="emit per-band IQ captures for a config")
    _add_config_arg(sub)
    sub.set_defaults(func=cmd_simulate)

    sub = subparsers.add_parser("scan", help="sweep the configured range and triage bands")
    _add_config_arg(sub)
    sub.set_defaults(func=cmd_scan)

    sub = subparsers.add_parser("reconstruct", help="rasterize a capture into an image")
    _add_capture_args(sub)
    sub.add_argument("--out", required=True, help="output PGM path")
    sub.set_defaults(func=cmd_reconstruct)

    sub = subparsers.add_parser("demux", help="split a capture into print and vein images")
    _add_capture_args(sub)
    sub.add_argument("--parity", choices=("auto", "0", "1"), default="auto")
    sub.add_argument("--out-prefix", required=True, help="prefix for _print.pgm / _vein.pgm")
    sub.set_defaults(func=cmd_demux)

    sub = subparsers.add_parser("fuse", help="fuse per-band images with simplex weights")
    sub.add_argument("images", nargs="+", help="per-band PGM reconstructions")
    sub.add_argument("--out", required=True, help="output PGM path")
    sub.add_argument("--lambda", dest="lam", type=float, default=0.1)
    sub.add_argument("--tau", type=float, default=0.0, help="noise soft-threshold multiplier")
    sub.add_argument("--v-target", default="auto", help="uniform-region target level, or 'auto'")
    sub.add_argument("--window", type=int, default=7, help="uniform-segmentation window")
    sub.add_argument("--var-threshold", type=float, default=1e-3)
    sub.add_argument("--figures", action="store_true")
    sub.set_defaults(func=cmd_fuse)

    sub = subparsers.add_parser("restore", help="regularized restoration of a reconstruction")
    sub.add_argument("input", help="input PGM")
    sub.add_argument("--out", required=True, help="output PGM path")
    sub.add_argument("--lambda", dest="lam", type=float, default=0.05)
    sub.add_argument("--iters", type=int, default=200)
    sub.add_argument("--forward", choices=("identity", "blur3"), default="identity")
    sub.add_argument("--noise-sigma", type=float, default=0.0)
    sub.add_argument("--figures", action="store_true")
    sub.set_defaults(func=cmd_restore)

    sub = subparsers.add_parser("metrics", help="compare a reconstruction against a reference")
    sub.add_argument("reconstruction")
    sub.add_argument("reference")
    sub.add_argument(
        "--canonical", action="store_true", help="min-max normalize both images first"
    )
    sub.set_defaults(func=cmd_metrics)

    sub = subparsers.add_parser("pipeline", help="run every stage from one config")
    _add_config_arg(sub)
    sub.set_defaults(func=cmd_pipeline)

    sub = subparsers.add_parser("demo-init", help="write a runnable example config and cards")
    sub.add_argument("directory")
    sub.add_argument("--size", type=int, default=64, help="card edge length in pixels")
    sub.set_defaults(func=cmd_demo_init)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.func is cmd_pipeline:
        return args.func(args)  # pipeline reports its own stage on failure
    try:
        return args.func(args)
    except (
        ConfigError,
        IqFormatError,
        ImageFormatError,
        SyncError,
        ValueError,
        RuntimeError,
        OSError,
    ) as exc:
        print(f"emleak: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
