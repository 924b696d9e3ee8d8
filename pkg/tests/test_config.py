"""Strict config parsing: typos must fail loudly, hashes must track meaning."""

import pytest

from emleak.config import ConfigError, load_config
from emleak.emission import EmissionMode

MINIMAL = "[run]\nseed = 7\n"

FULL = """\
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
noise_sigma = 0.05
drift_ppm = 50.0
bands = 50000:150000,150000:250000
bitgroup_weights = 1:0,0:1

[scan]
f_min_hz = 50000
f_max_hz = 450000
band_width_hz = 100000

[reconstruct]
out_width = 64
out_height = 64
frames_to_average = 8
sync = nominal

[demux]
parity = auto

[fuse]
lambda = 0.1
v_target = auto

[restore]
lambda = 0.05
iterations = 80
forward = identity
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_config_fills_defaults(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL))
    assert cfg.run.seed == 7
    assert cfg.run.out_dir == "out"
    assert cfg.run.figures is False
    assert cfg.simulate.mode is EmissionMode.BITGROUP_ANALYTIC
    assert cfg.simulate.bands == ((50000.0, 150000.0), (150000.0, 250000.0))
    assert cfg.simulate.bitgroup_weights == ((1.0, 0.0), (0.0, 1.0))
    assert cfg.reconstruct.interpolation == "nearest"
    assert cfg.reconstruct.theta_blank is None
    assert cfg.fuse.v_target is None
    assert cfg.demux.parity == "auto"
    assert len(cfg.config_hash) == 64


def test_full_config_parses(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    assert cfg.cards.print_path == "truth_print.pgm"
    assert cfg.simulate.frames == 32
    assert cfg.simulate.noise_sigma == 0.05
    assert cfg.scan.band_width_hz == 100000.0
    assert cfg.restore.iterations == 80


def test_seed_is_mandatory(tmp_path):
    with pytest.raises(ConfigError, match="seed"):
        load_config(write(tmp_path, "[run]\nout_dir = x\n"))


def test_missing_run_section(tmp_path):
    with pytest.raises(ConfigError, match=r"\[run\]"):
        load_config(write(tmp_path, "[cards]\nwidth = 64\n"))


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown keys: seeed"):
        load_config(write(tmp_path, "[run]\nseed = 1\nseeed = 2\n"))


def test_unknown_section_rejected(tmp_path):
    with pytest.raises(ConfigError, match=r"unknown section \[simulte\]"):
        load_config(write(tmp_path, "[run]\nseed = 1\n\n[simulte]\nframes = 4\n"))


def test_type_errors(tmp_path):
    with pytest.raises(ConfigError, match="integer"):
        load_config(write(tmp_path, "[run]\nseed = not-a-number\n"))
    with pytest.raises(ConfigError, match="number"):
        load_config(write(tmp_path, "[run]\nseed = 1\n\n[simulate]\nnoise_sigma = loud\n"))
    with pytest.raises(ConfigError, match="boolean"):
        load_config(write(tmp_path, "[run]\nseed = 1\nfigures = maybe\n"))
    with pytest.raises(ConfigError, match="one of"):
        load_config(write(tmp_path, "[run]\nseed = 1\n\n[simulate]\nmode = qam\n"))
    with pytest.raises(ConfigError, match="a:b"):
        load_config(write(tmp_path, "[run]\nseed = 1\n\n[simulate]\nbands = 10;20\n"))


def test_auto_maps_to_none(tmp_path):
    cfg = load_config(write(tmp_path, "[run]\nseed = 1\n\n[fuse]\nv_target = auto\n"))
    assert cfg.fuse.v_target is None
    cfg = load_config(write(tmp_path, "[run]\nseed = 1\n\n[fuse]\nv_target = 0.6\n"))
    assert cfg.fuse.v_target == 0.6
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[run]\nseed = 1\n\n[fuse]\nv_target = maybe\n"))


def test_hash_ignores_formatting(tmp_path):
    a = load_config(write(tmp_path, "[run]\nseed = 7\nout_dir = out\n", "a.cfg"))
    b = load_config(
        write(tmp_path, "# comment\n[run]\nout_dir =   out\nseed=7\n", "b.cfg")
    )
    assert a.config_hash == b.config_hash


def test_hash_equals_explicit_defaults(tmp_path):
    # spelling out a default yields the same parsed values, hence the same hash
    a = load_config(write(tmp_path, MINIMAL, "a.cfg"))
    b = load_config(write(tmp_path, "[run]\nseed = 7\nout_dir = out\n", "b.cfg"))
    assert a.config_hash == b.config_hash


def test_hash_tracks_semantic_change(tmp_path):
    base = load_config(write(tmp_path, FULL, "a.cfg"))
    changed = load_config(write(tmp_path, FULL.replace("frames = 32", "frames = 16"), "b.cfg"))
    assert base.config_hash != changed.config_hash
    renoised = load_config(
        write(tmp_path, FULL.replace("noise_sigma = 0.05", "noise_sigma = 0.06"), "c.cfg")
    )
    assert base.config_hash != renoised.config_hash


def test_emission_config_bridge(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    emission = cfg.simulate.emission_config()
    assert emission.mode is EmissionMode.BITGROUP_ANALYTIC
    assert emission.bands == ((50000.0, 150000.0), (150000.0, 250000.0))
    assert emission.bitgroup_weights == ((1.0, 0.0), (0.0, 1.0))
    assert emission.noise_sigma == 0.05
    # nrz mode drops the weights so the config stays valid
    nrz = load_config(write(tmp_path, FULL.replace("mode = bitgroup", "mode = nrz"), "n.cfg"))
    assert nrz.simulate.emission_config().bitgroup_weights == ()
