"""Image quality metrics and report emission.

PSNR and SSIM follow the standard super-resolution evaluation protocol:
values are clamped to [0, 1], optionally converted to studio-swing
luminance, a border is shaved, and the score is computed on the 255
scale.  Identical inputs report PSNR as +inf (serialized as "inf").
"""

from __future__ import annotations

import math

import numpy as np

from .image_io import to_luminance

__all__ = ["psnr", "ssim", "mae", "error_map", "write_report", "ERROR_COLORMAP"]

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_DYNAMIC_RANGE = 255.0


def _prepare(a: np.ndarray, b: np.ndarray, mode: str, shave: int):
    if a.shape != b.shape:
        raise ValueError(f"image dims differ: {a.shape} vs {b.shape}")
    if shave < 0 or 2 * shave >= min(a.shape[0], a.shape[1]):
        raise ValueError(f"shave {shave} out of range for {a.shape[:2]}")
    a = np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0)
    b = np.clip(np.asarray(b, dtype=np.float64), 0.0, 1.0)
    if mode == "y":
        if a.shape[2] == 3:
            a, b = to_luminance(a), to_luminance(b)
    elif mode != "rgb":
        raise ValueError(f"mode must be 'y' or 'rgb', got {mode!r}")
    if shave:
        a = a[shave:-shave, shave:-shave]
        b = b[shave:-shave, shave:-shave]
    return a * _DYNAMIC_RANGE, b * _DYNAMIC_RANGE


def psnr(a: np.ndarray, b: np.ndarray, mode: str = "y", shave: int = 0) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical inputs."""
    av, bv = _prepare(a, b, mode.lower(), shave)
    mse = np.mean((av - bv) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(_DYNAMIC_RANGE**2 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    t = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def _filter_valid(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 'valid' correlation along both spatial axes of (H, W, C)."""
    from numpy.lib.stride_tricks import sliding_window_view

    n = kernel.size
    win = sliding_window_view(x, n, axis=0)  # (H', W, C, n)
    x = np.tensordot(win, kernel, axes=(3, 0))
    win = sliding_window_view(x, n, axis=1)  # (H', W', C, n)
    return np.tensordot(win, kernel, axes=(3, 0))


def ssim(a: np.ndarray, b: np.ndarray, mode: str = "y", shave: int = 0) -> float:
    """Mean structural similarity over 11x11 Gaussian windows (sigma 1.5),
    K1 = 0.01, K2 = 0.03, dynamic range 255; channels are averaged."""
    av, bv = _prepare(a, b, mode.lower(), shave)
    if min(av.shape[0], av.shape[1]) < _SSIM_WINDOW:
        raise ValueError(
            f"image {av.shape[:2]} smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} window"
        )
    kernel = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    c1 = (_SSIM_K1 * _DYNAMIC_RANGE) ** 2
    c2 = (_SSIM_K2 * _DYNAMIC_RANGE) ** 2

    mu_a = _filter_valid(av, kernel)
    mu_b = _filter_valid(bv, kernel)
    var_a = _filter_valid(av * av, kernel) - mu_a * mu_a
    var_b = _filter_valid(bv * bv, kernel) - mu_b * mu_b
    cov = _filter_valid(av * bv, kernel) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def mae(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute error on the 255 scale."""
    if a.shape != b.shape:
        raise ValueError(f"image dims differ: {a.shape} vs {b.shape}")
    a = np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0)
    b = np.clip(np.asarray(b, dtype=np.float64), 0.0, 1.0)
    return float(np.abs(a - b).mean() * _DYNAMIC_RANGE)


def _build_colormap() -> np.ndarray:
    """256-entry black -> red -> yellow -> white ramp ("hot"):
    r = min(3t, 1), g = min(max(3t-1, 0), 1), b = min(max(3t-2, 0), 1)."""
    t = np.linspace(0.0, 1.0, 256)
    r = np.clip(3.0 * t, 0.0, 1.0)
    g = np.clip(3.0 * t - 1.0, 0.0, 1.0)
    b = np.clip(3.0 * t - 2.0, 0.0, 1.0)
    return np.stack([r, g, b], axis=1)


ERROR_COLORMAP = _build_colormap()


def error_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pixel channel-mean absolute difference rendered through the
    monotone 256-entry colormap; returns an (H, W, 3) image in [0, 1]."""
    if a.shape != b.shape:
        raise ValueError(f"image dims differ: {a.shape} vs {b.shape}")
    a = np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0)
    b = np.clip(np.asarray(b, dtype=np.float64), 0.0, 1.0)
    d = np.abs(a - b).mean(axis=2)
    idx = np.minimum(np.floor(d * 255.0 + 0.5).astype(np.int64), 255)
    return ERROR_COLORMAP[idx]


def _format_value(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.6f}"
    return str(v)


def write_report(rows: list, out=None) -> str:
    """Emit one TSV row per (image, scale, method) plus aggregate means.

    ``rows`` are dicts with keys image, scale, method, psnr, ssim, mae.
    ``out`` is a writable handle or a path; None returns the text only.
    """
    columns = ["image", "scale", "method", "psnr", "ssim", "mae"]
    lines = ["\t".join(columns)]
    for row in rows:
        lines.append("\t".join(_format_value(row[c]) for c in columns))
    if rows:
        means = []
        for c in ("psnr", "ssim", "mae"):
            means.append(float(np.mean([row[c] for row in rows])))
        lines.append(
            "\t".join(["mean", "-", "-"] + [_format_value(v) for v in means])
        )
    text = "\n".join(lines) + "\n"
    if out is None:
        return text
    if hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)
    return text
