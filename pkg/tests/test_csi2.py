"""Serializer and RAW10 codec against the bit-arithmetic oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emleak.csi2 import (
    GROUP_BYTES,
    GROUP_PIXELS,
    LineTiming,
    Modality,
    pack_raw10,
    packetize,
    padded_width,
    quantize10,
    sync_pattern,
    unpack_raw10,
)
from emleak.image import GrayImage

from .oracles import pack_raw10_reference, unpack_raw10_reference


def test_pack_known_vector():
    # worked example: saturating msb, zero, midpoint, lsb-only codes
    assert pack_raw10(np.array([1023, 0, 512, 3])).tolist() == [0xFF, 0x00, 0x80, 0x00, 0xC3]


def test_unpack_known_vector():
    assert unpack_raw10(np.array([0xFF, 0x00, 0x80, 0x00, 0xC3])).tolist() == [1023, 0, 512, 3]


def test_pack_matches_oracle_random():
    rng = np.random.default_rng(21)
    codes = rng.integers(0, 1024, size=4000)
    assert pack_raw10(codes).tolist() == pack_raw10_reference(codes.tolist())


def test_unpack_matches_oracle_random():
    rng = np.random.default_rng(22)
    data = rng.integers(0, 256, size=5 * 1000)
    assert unpack_raw10(data).tolist() == unpack_raw10_reference(data.tolist())


def test_round_trip_both_directions():
    rng = np.random.default_rng(23)
    codes = rng.integers(0, 1024, size=4 * 1024)
    assert np.array_equal(unpack_raw10(pack_raw10(codes)), codes)
    data = rng.integers(0, 256, size=5 * 512).astype(np.uint8)
    assert np.array_equal(pack_raw10(unpack_raw10(data)), data)


def test_pack_saturates_out_of_range():
    assert unpack_raw10(pack_raw10(np.array([-5, 2000, 7, 1023]))).tolist() == [0, 1023, 7, 1023]


@given(st.lists(st.integers(min_value=0, max_value=1023), min_size=4, max_size=64).filter(lambda xs: len(xs) % 4 == 0))
@settings(max_examples=200, deadline=None)
def test_round_trip_property(codes):
    arr = np.array(codes)
    assert np.array_equal(unpack_raw10(pack_raw10(arr)), arr)


def test_group_size_validation():
    with pytest.raises(ValueError):
        pack_raw10(np.array([1, 2, 3]))
    with pytest.raises(ValueError):
        unpack_raw10(np.arange(7))


def test_padded_width():
    assert [padded_width(w) for w in (1, 4, 5, 8, 63)] == [4, 4, 8, 8, 64]


def test_sync_pattern_alternates():
    assert sync_pattern(6).tolist() == [1, 0, 1, 0, 1, 0]


def test_quantize10_rounds():
    img = GrayImage(np.array([[0.0, 0.5, 1.0]]) , bit_depth_hint=10)
    assert quantize10(img).tolist() == [[0, 512, 1023]]


@pytest.fixture
def stream(aligned_timing, two_level_card):
    return packetize([two_level_card] * 4, aligned_timing, schedule="alternating")


def test_alternating_schedule_labels(stream):
    assert stream.modality_schedule == (
        Modality.PRINT,
        Modality.VEIN,
        Modality.PRINT,
        Modality.VEIN,
    )


def test_line_start_spacing_is_bits_per_line(stream):
    geom = stream.geometry
    per_frame = geom.height_px
    gaps = np.diff(stream.line_starts)
    # interior gaps within one frame equal bits_per_line exactly
    for k in range(geom.n_frames):
        frame_gaps = gaps[k * per_frame : (k + 1) * per_frame - 1]
        assert np.all(frame_gaps == geom.bits_per_line)


def test_frame_starts_spacing(stream):
    geom = stream.geometry
    assert np.all(np.diff(stream.frame_starts) == geom.bits_per_frame)
    assert stream.bits.size == geom.total_bits


def test_payload_bits_round_trip(stream, two_level_card):
    # slice frame 0 payload back out of the bit stream and decode it
    geom = stream.geometry
    base = geom.frame_blank_bits
    block = stream.bits[base : base + geom.active_bits_per_frame].reshape(
        geom.height_px, geom.bits_per_line
    )
    payload = block[:, geom.header_bits : geom.header_bits + geom.payload_bits_per_line]
    packed = np.packbits(payload, axis=1)
    codes = unpack_raw10(packed.reshape(-1)).reshape(geom.height_px, -1)
    expect = quantize10(two_level_card)
    assert np.array_equal(codes[:, : geom.width_px], expect)


def test_header_and_trailer_are_sync_patterns(stream):
    geom = stream.geometry
    base = geom.frame_blank_bits
    line = stream.bits[base : base + geom.bits_per_line]
    assert np.array_equal(line[: geom.header_bits], sync_pattern(geom.header_bits))
    trail_off = geom.header_bits + geom.payload_bits_per_line
    assert np.array_equal(
        line[trail_off : trail_off + geom.trailer_bits], sync_pattern(geom.trailer_bits)
    )


def test_blanking_is_zero(stream):
    geom = stream.geometry
    assert not stream.bits[: geom.frame_blank_bits].any()


def test_mismatched_frame_shapes_rejected(aligned_timing):
    a = GrayImage(np.zeros((4, 4)))
    b = GrayImage(np.zeros((4, 8)))
    with pytest.raises(ValueError):
        packetize([a, b], aligned_timing)


def test_unknown_schedule_rejected(aligned_timing, two_level_card):
    with pytest.raises(ValueError):
        packetize([two_level_card], aligned_timing, schedule="shuffled")


def test_timing_validation():
    with pytest.raises(ValueError):
        LineTiming(bit_rate_hz=0.0)
    with pytest.raises(ValueError):
        LineTiming(bit_rate_hz=1e6, header_bits=-1)


def test_group_constants():
    assert (GROUP_PIXELS, GROUP_BYTES) == (4, 5)
