"""Parity demultiplexing of alternating dual-modality captures."""

import numpy as np
import pytest

from emleak.cards import palm_print_card, palm_vein_card
from emleak.csi2 import packetize
from emleak.demux import (
    DemuxResult,
    assignment_error,
    auto_parity,
    demux,
    misalignment_error,
)
from emleak.emission import simulate_band
from emleak.image import GrayImage, normalized
from emleak.metrics import ssim
from emleak.raster import (
    Interpolation,
    RasterParams,
    average_frames_raw,
    envelope,
    sync_from_geometry,
)

from .conftest import BIT_RATE, SAMPLE_RATE, card_from_codes

PARAMS = RasterParams(64, 64, frames_to_average=8, interpolation=Interpolation.NEAREST)


def dual_capture(aligned_timing, msb_config, n_frames=16, noise_sigma=0.0, seed=0):
    frames = [palm_print_card() if k % 2 == 0 else palm_vein_card() for k in range(n_frames)]
    stream = packetize(frames, aligned_timing, schedule="alternating")
    cfg = msb_config(noise_sigma=noise_sigma)
    env = envelope(simulate_band(stream, aligned_timing, cfg, 0, seed=seed))
    sync = sync_from_geometry(stream.geometry, BIT_RATE, SAMPLE_RATE)
    return env, sync


def small_ab_capture(aligned_timing, msb_config):
    a = card_from_codes(np.full((16, 16), 200))
    b = card_from_codes(np.full((16, 16), 800))
    stream = packetize([a, b, a, b], aligned_timing, schedule="alternating")
    env = envelope(simulate_band(stream, aligned_timing, msb_config(), 0, seed=0))
    sync = sync_from_geometry(stream.geometry, BIT_RATE, SAMPLE_RATE)
    return env, sync


def test_parity_zero_groups_even_frames(aligned_timing, msb_config):
    env, sync = small_ab_capture(aligned_timing, msb_config)
    params = RasterParams(16, 16, frames_to_average=2, interpolation=Interpolation.NEAREST)
    res = demux(env, sync, params, parity_offset=0)
    # print = mean of frames 0 and 2, vein = mean of frames 1 and 3
    expect_print = average_frames_raw(env, sync, params, frame_indices=np.array([0, 2]))
    expect_vein = average_frames_raw(env, sync, params, frame_indices=np.array([1, 3]))
    assert np.array_equal(res.print_image.pixels, normalized(expect_print).pixels)
    assert np.array_equal(res.vein_image.pixels, normalized(expect_vein).pixels)
    assert res.n_print == 2 and res.n_vein == 2


def test_parity_one_swaps_groups(aligned_timing, msb_config):
    env, sync = small_ab_capture(aligned_timing, msb_config)
    params = RasterParams(16, 16, frames_to_average=2, interpolation=Interpolation.NEAREST)
    r0 = demux(env, sync, params, parity_offset=0)
    r1 = demux(env, sync, params, parity_offset=1)
    assert np.array_equal(r0.print_image.pixels, r1.vein_image.pixels)
    assert np.array_equal(r0.vein_image.pixels, r1.print_image.pixels)


def test_invalid_parity_rejected(aligned_timing, msb_config):
    env, sync = small_ab_capture(aligned_timing, msb_config)
    with pytest.raises(ValueError):
        demux(env, sync, RasterParams(16, 16, frames_to_average=2), parity_offset=2)


def test_noiseless_demux_recovers_both_cards(aligned_timing, msb_config):
    env, sync = dual_capture(aligned_timing, msb_config)
    res = demux(env, sync, PARAMS, parity_offset=0)
    truth_p = normalized(palm_print_card().pixels)
    truth_v = normalized(palm_vein_card().pixels)
    assert ssim(res.print_image, truth_p) > 0.95
    assert ssim(res.vein_image, truth_v) > 0.95
    # cross-assignment is visibly worse
    assert ssim(res.print_image, truth_v) < ssim(res.print_image, truth_p)


def test_misalignment_error_flags_swapped_parity(aligned_timing, msb_config):
    # crossed-pair penalty: large when the assignment is right, collapsing
    # when the parity is off by one — and the direct error mirrors it
    truth_p = normalized(palm_print_card().pixels)
    truth_v = normalized(palm_vein_card().pixels)
    for seed in range(20):
        env, sync = dual_capture(aligned_timing, msb_config, noise_sigma=0.05, seed=seed)
        correct = demux(env, sync, PARAMS, parity_offset=0)
        swapped = demux(env, sync, PARAMS, parity_offset=1)
        assert misalignment_error(correct, truth_p, truth_v) > misalignment_error(
            swapped, truth_p, truth_v
        )
        assert assignment_error(swapped, truth_p, truth_v) > assignment_error(
            correct, truth_p, truth_v
        )
        assert misalignment_error(correct, truth_p, truth_v) > assignment_error(
            correct, truth_p, truth_v
        )


def test_crossed_and_direct_errors_mirror(aligned_timing, msb_config):
    truth_p = normalized(palm_print_card().pixels)
    truth_v = normalized(palm_vein_card().pixels)
    env, sync = dual_capture(aligned_timing, msb_config, noise_sigma=0.02, seed=5)
    correct = demux(env, sync, PARAMS, parity_offset=0)
    swapped = demux(env, sync, PARAMS, parity_offset=1)
    # swapping the parity exchanges the two error measures exactly
    assert misalignment_error(swapped, truth_p, truth_v) == pytest.approx(
        assignment_error(correct, truth_p, truth_v)
    )
    assert assignment_error(swapped, truth_p, truth_v) == pytest.approx(
        misalignment_error(correct, truth_p, truth_v)
    )


def test_auto_parity_recovers_injected_parity(aligned_timing, msb_config):
    env, sync = dual_capture(aligned_timing, msb_config, noise_sigma=0.05, seed=11)
    decision = auto_parity(env, sync, PARAMS)
    # print (stronger surface contrast) sits on even frames here
    assert decision.parity == 0
    assert not decision.warning
    assert decision.variance_gap > 0.05


def test_auto_parity_warns_on_identical_frames(aligned_timing, msb_config):
    # an arbitrary even/odd split of K noise-only frame differences still
    # "explains" ~1/(K-1) of the variance, so the warning needs enough frames
    card = palm_print_card(16, 16)
    stream = packetize([card] * 32, aligned_timing, schedule="single")
    cfg = msb_config(noise_sigma=0.05)
    env = envelope(simulate_band(stream, aligned_timing, cfg, 0, seed=2))
    sync = sync_from_geometry(stream.geometry, BIT_RATE, SAMPLE_RATE)
    decision = auto_parity(env, sync, RasterParams(16, 16, frames_to_average=16))
    assert decision.warning
    assert decision.variance_gap < 0.05


def test_demux_needs_two_frames(aligned_timing, msb_config):
    card = palm_print_card()
    stream = packetize([card], aligned_timing, schedule="single")
    env = envelope(simulate_band(stream, aligned_timing, msb_config(), 0, seed=0))
    sync = sync_from_geometry(stream.geometry, BIT_RATE, SAMPLE_RATE)
    with pytest.raises(ValueError, match="2 detected frames"):
        demux(env, sync, RasterParams(64, 64, frames_to_average=4))


def test_result_validation():
    img = GrayImage(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        DemuxResult(print_image=img, vein_image=img, n_print=5, n_vein=3, parity_offset=0)
    with pytest.raises(ValueError):
        DemuxResult(print_image=img, vein_image=img, n_print=2, n_vein=2, parity_offset=3)
