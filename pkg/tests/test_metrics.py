"""Fidelity metrics against brute-force reference implementations."""

import math

import numpy as np

from emleak.image import GrayImage
from emleak.metrics import (
    distinct_levels,
    edge_intensity,
    gaussian_window,
    histogram_entropy,
    metric_report,
    psnr,
    ssim,
)

from .oracles import gaussian_window_reference, psnr_reference, ssim_reference


def random_pair(rng, shape):
    return rng.random(shape), rng.random(shape)


def test_psnr_identical_is_infinite():
    img = np.random.default_rng(0).random((8, 8))
    assert psnr(img, img) == math.inf


def test_ssim_identical_is_one():
    img = np.random.default_rng(1).random((16, 16))
    assert ssim(img, img) == 1.0


def test_psnr_matches_oracle_8x8():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a, b = random_pair(rng, (8, 8))
        assert abs(psnr(a, b) - psnr_reference(a, b)) < 1e-9


def test_gaussian_window_matches_oracle():
    assert np.allclose(gaussian_window(), gaussian_window_reference(), atol=1e-12)
    assert abs(gaussian_window().sum() - 1.0) < 1e-12


def test_ssim_matches_oracle_100_random_pairs():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        a, b = random_pair(rng, (32, 32))
        worst = max(worst, abs(ssim(a, b) - ssim_reference(a, b)))
    assert worst < 1e-6


def test_ssim_inverted_high_contrast_below_half():
    rng = np.random.default_rng(4)
    a = (rng.random((16, 16)) > 0.5).astype(np.float64)
    assert ssim(a, 1.0 - a) < 0.5


def test_ssim_accepts_gray_images():
    rng = np.random.default_rng(5)
    a, b = random_pair(rng, (16, 16))
    assert ssim(GrayImage(a), GrayImage(b)) == ssim(a, b)


def test_histogram_entropy_limits():
    assert histogram_entropy(np.zeros((8, 8))) == 0.0
    # 256 equally filled bins -> ln 256
    levels = (np.arange(256, dtype=np.float64) + 0.5) / 256
    img = np.tile(levels, 4).reshape(32, 32)
    assert abs(histogram_entropy(img) - math.log(256)) < 1e-12


def test_edge_intensity_flat_is_zero():
    assert edge_intensity(np.full((6, 6), 0.3)) == 0.0


def test_edge_intensity_positive_on_step():
    img = np.zeros((8, 8))
    img[:, 4:] = 1.0
    assert edge_intensity(img) > 0.1


def test_distinct_levels_collapses_float_jitter():
    rng = np.random.default_rng(6)
    base = np.repeat(np.linspace(0.0, 1.0, 32), 8).reshape(16, 16)
    jittered = np.clip(base + rng.uniform(-1e-10, 1e-10, base.shape), 0.0, 1.0)
    assert distinct_levels(base) == 32
    assert distinct_levels(jittered) == 32


def test_distinct_levels_separates_real_steps():
    img = np.array([[0.0, 1 / 1023, 2 / 1023, 1.0]])
    assert distinct_levels(img) == 4


def test_metric_report_fields():
    rng = np.random.default_rng(7)
    a = GrayImage(rng.random((16, 16)))
    report = metric_report(a, a)
    assert report.psnr_db == math.inf
    assert report.ssim == 1.0
    assert report.entropy_nats > 0.0
