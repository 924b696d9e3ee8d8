"""Independent reference implementations used as test oracles.

Everything here is deliberately written the slow, obvious way — per-group
loops, per-window loops, explicit padding — so a failure points at the
production code, not at a shared formula.  None of these functions import
anything from the package beyond plain array types.
"""

from __future__ import annotations

import math

import numpy as np


def pack_raw10_reference(codes: list[int]) -> list[int]:
    """Group-of-4 RAW10 packing built from divmod arithmetic on ints."""
    assert len(codes) % 4 == 0
    out: list[int] = []
    for g in range(0, len(codes), 4):
        group = [max(0, min(1023, int(c))) for c in codes[g : g + 4]]
        tails = []
        for c in group:
            head, tail = divmod(c, 4)
            out.append(head)
            tails.append(tail)
        fifth = 0
        for i, tail in enumerate(tails):
            fifth += tail * (4**i)
        out.append(fifth)
    return out


def unpack_raw10_reference(data: list[int]) -> list[int]:
    """Inverse of the packing oracle, same idiom."""
    assert len(data) % 5 == 0
    out: list[int] = []
    for g in range(0, len(data), 5):
        group = [int(b) for b in data[g : g + 5]]
        fifth = group[4]
        for i in range(4):
            tail = (fifth // (4**i)) % 4
            out.append(group[i] * 4 + tail)
    return out


def psnr_reference(a: np.ndarray, b: np.ndarray) -> float:
    mse = 0.0
    for x, y in zip(np.asarray(a).ravel(), np.asarray(b).ravel()):
        mse += (float(x) - float(y)) ** 2
    mse /= a.size
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window_reference(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = size // 2
    w = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            w[i, j] = math.exp(-((i - half) ** 2 + (j - half) ** 2) / (2.0 * sigma**2))
    return w / w.sum()


def ssim_reference(
    a: np.ndarray,
    b: np.ndarray,
    size: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Fully interior windows, weighted centered moments, one window at a time."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c1 = k1**2
    c2 = k2**2
    w = gaussian_window_reference(size, sigma)
    h, wdt = a.shape
    values = []
    for top in range(h - size + 1):
        for left in range(wdt - size + 1):
            wa = a[top : top + size, left : left + size]
            wb = b[top : top + size, left : left + size]
            mu_a = float(np.sum(w * wa))
            mu_b = float(np.sum(w * wb))
            var_a = float(np.sum(w * (wa - mu_a) ** 2))
            var_b = float(np.sum(w * (wb - mu_b) ** 2))
            cov = float(np.sum(w * (wa - mu_a) * (wb - mu_b)))
            num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
            den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
            values.append(num / den)
    return float(np.mean(values))


def total_variation_reference(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape
    tv = 0.0
    for i in range(h):
        for j in range(w):
            if i + 1 < h:
                tv += abs(x[i + 1, j] - x[i, j])
            if j + 1 < w:
                tv += abs(x[i, j + 1] - x[i, j])
    return tv


def autocorr_reference(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Unbiased per-lag sums over the biased variance, clamped like the library."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    mu = float(x.mean())
    var = float(np.mean((x - mu) ** 2))
    r = np.zeros(max_lag + 1)
    if var <= 0.0:
        return r
    for k in range(max_lag + 1):
        acc = 0.0
        for i in range(n - k):
            acc += (x[i] - mu) * (x[i + k] - mu)
        r[k] = (acc / (n - k)) / var
    return np.clip(r, -1.0, 1.0)


def spectral_entropy_reference(samples: np.ndarray) -> float:
    power = np.abs(np.fft.fft(np.asarray(samples))) ** 2
    total = float(power.sum())
    if total <= 0.0:
        return 0.0
    acc = 0.0
    for p in power:
        q = float(p) / total
        if q > 0.0:
            acc -= q * math.log(q)
    return acc


def local_variance_reference(img: np.ndarray, window: int) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    half = window // 2
    # border convention: mirror with the edge sample repeated
    padded = np.pad(img, half, mode="symmetric")
    out = np.empty_like(img)
    for i in range(img.shape[0]):
        for j in range(img.shape[1]):
            patch = padded[i : i + window, j : j + window]
            out[i, j] = float(np.mean(patch**2) - np.mean(patch) ** 2)
    return np.maximum(out, 0.0)


def zoh_interval_mean(amp: np.ndarray, a: float, b: float) -> float:
    """Average of a zero-order-hold signal over the fractional interval [a, b)."""
    amp = np.asarray(amp, dtype=np.float64)
    b = min(b, float(amp.size))
    if b <= a:
        return float(amp[min(int(a), amp.size - 1)])
    acc = 0.0
    pos = a
    while pos < b - 1e-12:
        idx = int(math.floor(pos))
        seg_end = min(float(idx + 1), b)
        acc += amp[idx] * (seg_end - pos)
        pos = seg_end
    return acc / (b - a)
