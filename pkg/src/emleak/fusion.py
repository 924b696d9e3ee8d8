"""Weighted fusion of per-band reconstructions.

Each accepted band sees the same scene through a different bit-group
response, so a convex combination can recover detail no single band
holds.  Weights live on the probability simplex and minimize a
flatness-plus-sharpness objective: squared deviation from a target
level over a region known to be uniform, minus a sharpness bonus
(mean gradient magnitude over the union of per-band edge sets).

The PGD solve keeps the vertices (single-band selections) as explicit
candidates, so the fused objective is never worse than the best
individual band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage

from .image import GrayImage
from .metrics import gradient_magnitude

DEFAULT_LAMBDA = 0.1
DEFAULT_WINDOW = 7
DEFAULT_VAR_THRESHOLD = 1e-3
EDGE_PERCENTILE = 75.0
MAX_ITERATIONS = 500
GRAD_TOL = 1e-8


@dataclass(frozen=True)
class FusionWeights:
    alpha: tuple[float, ...]

    def __post_init__(self) -> None:
        arr = np.asarray(self.alpha, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("alpha must be a non-empty vector")
        if np.any(arr < -1e-9) or abs(float(arr.sum()) - 1.0) > 1e-6:
            raise ValueError("alpha must lie on the probability simplex")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=np.float64)


@dataclass(frozen=True)
class FusionProblem:
    bands: tuple[GrayImage, ...]
    uniform_mask: np.ndarray
    v_target: float
    lam: float = DEFAULT_LAMBDA
    noise_threshold_tau: float = 0.0

    def __post_init__(self) -> None:
        if not self.bands:
            raise ValueError("fusion needs at least one band")
        shape = self.bands[0].pixels.shape
        for band in self.bands[1:]:
            if band.pixels.shape != shape:
                raise ValueError("all bands must share one shape")
        mask = np.asarray(self.uniform_mask)
        if mask.dtype != np.bool_ or mask.shape != shape:
            raise ValueError("uniform_mask must be a boolean array of the band shape")
        if not mask.any():
            raise ValueError("uniform_mask selects no pixels")
        if not 0.0 <= self.v_target <= 1.0:
            raise ValueError("v_target must lie in [0, 1]")
        if self.lam < 0.0 or self.noise_threshold_tau < 0.0:
            raise ValueError("lam and noise_threshold_tau must be non-negative")


def local_variance(image: GrayImage | np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Per-pixel variance over a ``window``-square neighborhood (reflected borders)."""
    pixels = image.pixels if isinstance(image, GrayImage) else np.asarray(image, dtype=np.float64)
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    if window > min(pixels.shape):
        raise ValueError("window exceeds the image extent")
    mean = scipy.ndimage.uniform_filter(pixels, size=window, mode="reflect")
    mean_sq = scipy.ndimage.uniform_filter(pixels * pixels, size=window, mode="reflect")
    return np.maximum(mean_sq - mean * mean, 0.0)


def segment_uniform(
    image: GrayImage | np.ndarray,
    window: int = DEFAULT_WINDOW,
    var_threshold: float = DEFAULT_VAR_THRESHOLD,
) -> np.ndarray:
    """Mark pixels whose local variance falls below a threshold."""
    if var_threshold < 0.0:
        raise ValueError("var_threshold must be non-negative")
    return local_variance(image, window) < var_threshold


def amplitude_threshold(
    band: GrayImage,
    tau: float,
    sigma_est: float,
    mask: np.ndarray | None = None,
) -> GrayImage:
    """Soft-threshold a band's deviation from its mean level.

    Deviations smaller than ``tau * sigma_est`` are treated as noise and
    removed; larger ones shrink by that amount.  ``mask`` selects the
    pixels whose mean defines the reference level (default: all).
    """
    if tau < 0.0 or sigma_est < 0.0:
        raise ValueError("tau and sigma_est must be non-negative")
    pixels = band.pixels
    mu = float(pixels[mask].mean()) if mask is not None else float(pixels.mean())
    delta = pixels - mu
    shrunk = np.sign(delta) * np.maximum(np.abs(delta) - tau * sigma_est, 0.0)
    return GrayImage(np.clip(mu + shrunk, 0.0, 1.0), bit_depth_hint=band.bit_depth_hint)


def default_v_target(bands: tuple[GrayImage, ...], uniform_mask: np.ndarray) -> float:
    """Median level of the uniform region in the highest-energy band."""
    energies = [float(np.sum(b.pixels**2)) for b in bands]
    best = bands[int(np.argmax(energies))]
    return float(np.median(best.pixels[uniform_mask]))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    j = np.arange(1, v.size + 1)
    rho = int(np.max(j[u - css / j > 0.0]))
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


class _Workspace:
    """Preprocessed tensors shared by the objective and its gradient."""

    def __init__(self, problem: FusionProblem) -> None:
        bands = problem.bands
        if problem.noise_threshold_tau > 0.0:
            processed = []
            for band in bands:
                sigma = float(np.std(band.pixels[problem.uniform_mask]))
                processed.append(
                    amplitude_threshold(
                        band, problem.noise_threshold_tau, sigma, problem.uniform_mask
                    )
                )
            bands = tuple(processed)
        self.bands = bands
        self.stack = np.stack([b.pixels for b in bands])
        self.mask = np.asarray(problem.uniform_mask)
        self.v_target = problem.v_target
        self.lam = problem.lam

        grads_x = []
        grads_y = []
        edge_union = np.zeros(self.stack.shape[1:], dtype=bool)
        for layer in self.stack:
            gy, gx = np.gradient(layer)
            grads_y.append(gy)
            grads_x.append(gx)
            mag = np.hypot(gy, gx)
            edge_union |= mag > np.percentile(mag, EDGE_PERCENTILE)
        self.grad_y = np.stack(grads_y)
        self.grad_x = np.stack(grads_x)
        self.edges = edge_union

    def combine(self, alpha: np.ndarray) -> np.ndarray:
        return np.tensordot(alpha, self.stack, axes=1)

    def objective(self, alpha: np.ndarray) -> float:
        fused = self.combine(alpha)
        fidelity = float(np.sum((fused[self.mask] - self.v_target) ** 2))
        return fidelity + self.lam * self._sharpness_penalty(alpha)

    def _sharpness_penalty(self, alpha: np.ndarray) -> float:
        if not self.edges.any():
            return 0.0
        gy = np.tensordot(alpha, self.grad_y, axes=1)
        gx = np.tensordot(alpha, self.grad_x, axes=1)
        mag = np.hypot(gy, gx)
        return -float(np.mean(mag[self.edges]))

    def gradient(self, alpha: np.ndarray) -> np.ndarray:
        fused = self.combine(alpha)
        residual = fused[self.mask] - self.v_target
        grad = 2.0 * np.array(
            [float(np.sum(residual * layer[self.mask])) for layer in self.stack]
        )
        if self.edges.any():
            gy = np.tensordot(alpha, self.grad_y, axes=1)
            gx = np.tensordot(alpha, self.grad_x, axes=1)
            mag = np.hypot(gy, gx)[self.edges]
            safe = np.where(mag > 1e-12, mag, 1.0)
            uy = np.where(mag > 1e-12, gy[self.edges] / safe, 0.0)
            ux = np.where(mag > 1e-12, gx[self.edges] / safe, 0.0)
            n_edges = int(np.count_nonzero(self.edges))
            for i in range(self.stack.shape[0]):
                contrib = uy * self.grad_y[i][self.edges] + ux * self.grad_x[i][self.edges]
                grad[i] += self.lam * (-float(np.sum(contrib)) / n_edges)
        return grad


def _descend(ws: _Workspace, alpha0: np.ndarray) -> tuple[np.ndarray, float]:
    alpha = project_simplex(alpha0)
    value = ws.objective(alpha)
    step = 1.0
    for _ in range(MAX_ITERATIONS):
        grad = ws.gradient(alpha)
        if float(np.linalg.norm(grad - grad.mean())) < GRAD_TOL:
            break  # gradient constant along the simplex: stationary
        moved = 0.0
        improved = False
        for _ in range(60):
            candidate = project_simplex(alpha - step * grad)
            cand_value = ws.objective(candidate)
            if cand_value < value - 1e-15:
                moved = float(np.linalg.norm(candidate - alpha))
                alpha, value = candidate, cand_value
                step *= 1.5
                improved = True
                break
            step *= 0.5
        if not improved or moved < 1e-14:
            break
    return alpha, value


def fusion_objective(problem: FusionProblem, weights: FusionWeights) -> float:
    """Objective value for a weight vector, including preprocessing."""
    return _Workspace(problem).objective(weights.as_array())


def fuse(problem: FusionProblem) -> tuple[GrayImage, FusionWeights]:
    """Solve for fusion weights and return the fused image.

    Projected gradient descent starts from uniform weights; every
    vertex of the simplex is also evaluated (and descended from, if it
    beats the interior solve), so the returned objective never exceeds
    that of any single band.
    """
    ws = _Workspace(problem)
    n = ws.stack.shape[0]
    best_alpha, best_value = _descend(ws, np.full(n, 1.0 / n))
    vertex_values = []
    for i in range(n):
        vertex = np.zeros(n)
        vertex[i] = 1.0
        vertex_values.append((ws.objective(vertex), vertex))
    best_vertex_value, best_vertex = min(vertex_values, key=lambda t: t[0])
    if best_vertex_value < best_value:
        alpha_v, value_v = _descend(ws, best_vertex)
        if value_v < best_vertex_value:
            best_alpha, best_value = alpha_v, value_v
        else:
            best_alpha, best_value = best_vertex, best_vertex_value

    fused = np.clip(ws.combine(best_alpha), 0.0, 1.0)
    hint = max(b.bit_depth_hint for b in problem.bands)
    weights = FusionWeights(alpha=tuple(float(a) for a in best_alpha))
    return GrayImage(fused, bit_depth_hint=hint), weights
