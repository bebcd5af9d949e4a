"""Classical resampling operators: average pooling, bicubic / nearest
resizing and Gaussian blur.

The resizers are separable.  Both use the pixel-center coordinate mapping
src = (dst + 0.5) / scale - 0.5 and clamp sample coordinates at the edges.
Bicubic uses the cubic-convolution kernel with a = -0.5.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy import ndimage

__all__ = [
    "avg_pool",
    "bicubic_resize",
    "nearest_resize",
    "gaussian_blur",
    "cubic_kernel",
    "resize_matrix",
]


def avg_pool(img: np.ndarray, window: int, stride: int) -> np.ndarray:
    """Non-overlapping average pooling per channel.

    Requires window == stride and both spatial dims divisible by stride.
    """
    if window != stride:
        raise ValueError(f"window ({window}) must equal stride ({stride})")
    if window < 1:
        raise ValueError("window must be positive")
    h, w = img.shape[:2]
    if h % stride or w % stride:
        raise ValueError(f"dims {h}x{w} not divisible by stride {stride}")
    c = img.shape[2]
    blocks = img.reshape(h // stride, stride, w // stride, stride, c)
    return blocks.mean(axis=(1, 3))


def cubic_kernel(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Cubic-convolution interpolation kernel, nonzero on |t| < 2."""
    t = np.abs(t)
    near = (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
    far = a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def _target_len(n: int, scale: Fraction) -> int:
    out = n * scale
    if out.denominator != 1:
        if scale < 1:
            raise ValueError(f"down-scale {scale} of length {n} is not integral")
        out = Fraction(int(np.floor(float(out) + 0.5)))  # round(n * scale)
    out = int(out)
    if out < 1:
        raise ValueError(f"scale {scale} collapses length {n} to zero")
    return out


def _as_fraction(scale) -> Fraction:
    s = Fraction(scale).limit_denominator(10**6)
    if s <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return s


def resize_matrix(n_in: int, scale, kind: str = "bicubic") -> np.ndarray:
    """Dense (n_out, n_in) matrix of one separable resizing axis.

    Rows hold the interpolation weights for each output coordinate under
    the pixel-center mapping; out-of-range taps are clamped to the border
    sample, so every row still sums to 1.
    """
    s = _as_fraction(scale)
    n_out = _target_len(n_in, s)
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        src = (i + 0.5) / float(s) - 0.5
        if kind == "bicubic":
            base = int(np.floor(src))
            taps = np.arange(base - 1, base + 3)
            weights = cubic_kernel(src - taps)
        elif kind == "nearest":
            # round half toward the later sample, matching floor(src + 0.5)
            taps = np.array([int(np.floor(src + 0.5))])
            weights = np.array([1.0])
        else:
            raise ValueError(f"unknown resize kind: {kind}")
        taps = np.clip(taps, 0, n_in - 1)
        for j, wgt in zip(taps, weights):
            mat[i, j] += wgt
    return mat


def _resize(img: np.ndarray, scale, kind: str) -> np.ndarray:
    if img.ndim != 3:
        raise ValueError("expected an (H, W, C) image")
    s = _as_fraction(scale)
    h, w = img.shape[:2]
    rmat = resize_matrix(h, s, kind)
    cmat = resize_matrix(w, s, kind)
    # separable application: rows, then columns
    tmp = np.tensordot(rmat, img, axes=(1, 0))  # (H', W, C)
    out = np.tensordot(cmat, tmp, axes=(1, 1))  # (W', H', C)
    return np.ascontiguousarray(out.transpose(1, 0, 2))


def bicubic_resize(img: np.ndarray, scale) -> np.ndarray:
    """Separable cubic-convolution resize (a = -0.5, clamped edges)."""
    return _resize(img, scale, "bicubic")


def nearest_resize(img: np.ndarray, scale) -> np.ndarray:
    """Nearest-sample resize under the same coordinate mapping as bicubic."""
    return _resize(img, scale, "nearest")


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, kernel radius ceil(3*sigma), weights
    normalized to sum 1, reflect padding at the borders."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if img.ndim != 3:
        raise ValueError("expected an (H, W, C) image")
    radius = int(np.ceil(3.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (t / sigma) ** 2)
    kernel /= kernel.sum()
    out = ndimage.correlate1d(img, kernel, axis=0, mode="reflect")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="reflect")
    return out
