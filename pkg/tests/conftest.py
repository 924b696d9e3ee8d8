"""Shared fixtures: an exactly-aligned link configuration and card helpers.

The aligned configuration makes one receiver sample land on one pixel's
bit group (sample rate = bit rate / 10, all timing spans multiples of
10), so noiseless reconstructions are exact and tests can assert
equality instead of tolerances.
"""

from __future__ import annotations

import numpy as np
import pytest

from emleak.csi2 import LineTiming, packetize
from emleak.emission import EmissionConfig, EmissionMode
from emleak.image import GrayImage

BIT_RATE = 1e6
SAMPLE_RATE = 1e5  # one sample per 10-bit pixel group


@pytest.fixture
def aligned_timing() -> LineTiming:
    return LineTiming(
        bit_rate_hz=BIT_RATE,
        header_bits=60,
        trailer_bits=60,
        line_blank_bits=160,
        frame_blank_bits=3680,
    )


@pytest.fixture
def msb_config():
    def make(noise_sigma=0.0, drift_ppm=0.0, bands=((50e3, 150e3),), weights=None):
        if weights is None:
            weights = tuple((1.0, 0.0) for _ in bands)
        return EmissionConfig(
            bands=bands,
            sdr_sample_rate_hz=SAMPLE_RATE,
            noise_sigma=noise_sigma,
            drift_ppm=drift_ppm,
            mode=EmissionMode.BITGROUP_ANALYTIC,
            bitgroup_weights=weights,
        )

    return make


def card_from_codes(codes: np.ndarray) -> GrayImage:
    return GrayImage(np.asarray(codes, dtype=np.float64) / 1023.0, bit_depth_hint=10)


@pytest.fixture
def two_level_card() -> GrayImage:
    codes = np.full((16, 16), 256.0)
    codes[:, 8:] = 768.0
    return card_from_codes(codes)


@pytest.fixture
def small_stream(aligned_timing, two_level_card):
    return packetize([two_level_card] * 4, aligned_timing, schedule="single")
