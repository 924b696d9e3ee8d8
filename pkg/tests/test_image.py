"""GrayImage container and PGM reader/writer."""

import numpy as np
import pytest

from emleak.image import GrayImage, ImageFormatError, from_flat, normalized, read_image, write_image


def test_pgm_1x1_maxval_1023_big_endian(tmp_path):
    # payload bytes 0x01 0xFF are big-endian 511
    p = tmp_path / "one.pgm"
    p.write_bytes(b"P5\n1 1\n1023\n" + bytes([0x01, 0xFF]))
    img = read_image(p)
    assert img.width == 1 and img.height == 1
    assert img.bit_depth_hint == 10
    assert img.pixels[0, 0] == 511 / 1023


def test_write_read_round_trip_8bit(tmp_path):
    rng = np.random.default_rng(3)
    img = GrayImage(np.round(rng.random((9, 7)) * 255) / 255)
    path = write_image(img, tmp_path / "r.pgm")
    back = read_image(path)
    assert np.array_equal(back.pixels, img.pixels)
    # a conforming file re-serializes byte-identically
    assert write_image(back, tmp_path / "r2.pgm").read_bytes() == path.read_bytes()


def test_write_read_round_trip_10bit(tmp_path):
    rng = np.random.default_rng(4)
    img = GrayImage(np.round(rng.random((5, 6)) * 1023) / 1023, bit_depth_hint=10)
    back = read_image(write_image(img, tmp_path / "t.pgm"))
    assert np.allclose(back.pixels, img.pixels, atol=0, rtol=0)
    assert back.bit_depth_hint == 10


def test_comment_free_header_tokens(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P4\n1 1\n255\n\x00")
    with pytest.raises(ImageFormatError, match="magic"):
        read_image(p)
    p.write_bytes(b"P5\n2 2\n255\n\x00\x00\x00")  # 3 bytes, need 4
    with pytest.raises(ImageFormatError, match="raster"):
        read_image(p)
    p.write_bytes(b"P5\n1 1\n300\n\x00")
    with pytest.raises(ImageFormatError, match="maxval"):
        read_image(p)


def test_normalized_constant_maps_to_zero():
    img = normalized(np.full((4, 4), 3.7))
    assert np.array_equal(img.pixels, np.zeros((4, 4)))


def test_normalized_spans_unit_interval():
    arr = np.array([[2.0, 4.0], [6.0, 10.0]])
    img = normalized(arr)
    assert img.pixels.min() == 0.0 and img.pixels.max() == 1.0
    assert img.pixels[0, 1] == 0.25


def test_from_flat_shape_check():
    with pytest.raises(ValueError):
        from_flat(3, 3, np.zeros(8))
    img = from_flat(2, 3, np.linspace(0, 1, 6))
    assert img.width == 2 and img.height == 3


def test_pixel_range_enforced():
    with pytest.raises(ValueError):
        GrayImage(np.array([[0.0, 1.2]]))
    with pytest.raises(ValueError):
        GrayImage(np.array([[0.0, -0.1]]))


def test_pixels_frozen():
    img = GrayImage(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1.0
