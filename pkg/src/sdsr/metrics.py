"""PSNR and SSIM on the [0, 255] intensity scale."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d

from .image_core import ShapeMismatchError, check_same_shape

PEAK = 255.0

# Reference SSIM settings: 11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03.
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(u: np.ndarray, ref: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are identical."""
    check_same_shape(u, ref)
    mse = float(np.mean((np.asarray(u, dtype=np.float64) - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK ** 2 / mse)


def gaussian_window_1d(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2
    z = np.arange(-half, half + 1)
    w = np.exp(-z ** 2 / (2.0 * sigma ** 2))
    return w / w.sum()


def _filter_valid(x, w):
    # separable correlation, then keep only windows lying fully inside the image
    r = len(w) // 2
    y = correlate1d(correlate1d(x, w, axis=0, mode="constant"), w, axis=1, mode="constant")
    return y[r:-r, r:-r]


def ssim_map(u: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Local SSIM values for every fully contained 11x11 window."""
    check_same_shape(u, ref)
    x = np.asarray(u, dtype=np.float64)
    y = np.asarray(ref, dtype=np.float64)
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs both dimensions >= {SSIM_WINDOW}, got {x.shape}")
    w = gaussian_window_1d()
    c1 = (SSIM_K1 * PEAK) ** 2
    c2 = (SSIM_K2 * PEAK) ** 2

    mx = _filter_valid(x, w)
    my = _filter_valid(y, w)
    sxx = _filter_valid(x * x, w) - mx * mx
    syy = _filter_valid(y * y, w) - my * my
    sxy = _filter_valid(x * y, w) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return num / den


def ssim(u: np.ndarray, ref: np.ndarray) -> float:
    """Mean structural similarity index."""
    return float(np.mean(ssim_map(u, ref)))


def quality(u: np.ndarray, ref: np.ndarray) -> tuple[float, float]:
    """``(psnr, ssim)`` of ``u`` against the reference image."""
    return psnr(u, ref), ssim(u, ref)


__all__ = ["psnr", "ssim", "ssim_map", "quality", "ShapeMismatchError"]
