"""PNG I/O, luminance conversion, patch extraction and dihedral augmentation.

Images are numpy float arrays of shape (H, W, C) with C in {1, 3} and
intensities nominally in [0, 1].  Loading maps integer samples to [0, 1] by
dividing by the bit-depth maximum; saving clamps, multiplies by 255 and
rounds half-away-from-zero to 8-bit.
"""

from __future__ import annotations

import os

import cv2
import numpy as np

__all__ = [
    "load_image",
    "save_image",
    "to_luminance",
    "random_patch",
    "dihedral",
    "make_rng",
    "validate_image",
]

# BT.601 studio-swing luminance coefficients on the 255 scale:
#   Y = (65.738 R + 129.057 G + 25.064 B) / 256 + 16
_LUMA_R = 65.738
_LUMA_G = 129.057
_LUMA_B = 25.064


def make_rng(seed: int) -> np.random.Generator:
    """Seeded deterministic generator (PCG64); identical seeds give
    identical draw sequences on every platform."""
    return np.random.Generator(np.random.PCG64(seed))


def validate_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    """Check the (H, W, C) layout and return the array unchanged."""
    if not isinstance(img, np.ndarray) or img.ndim != 3:
        raise ValueError(f"{name} must be an (H, W, C) array")
    h, w, c = img.shape
    if h == 0 or w == 0:
        raise ValueError(f"{name} has a zero dimension")
    if c not in (1, 3):
        raise ValueError(f"{name} must have 1 or 3 channels, got {c}")
    return img


def load_image(path: str) -> np.ndarray:
    """Load an 8- or 16-bit PNG as an (H, W, 3) float64 array in [0, 1].

    Grayscale files are replicated to 3 channels.  Formats other than
    8/16-bit gray or RGB PNG are rejected.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such image file: {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"unsupported or unreadable image: {path}")
    if raw.dtype == np.uint8:
        maxval = 255.0
    elif raw.dtype == np.uint16:
        maxval = 65535.0
    else:
        raise ValueError(f"unsupported sample type {raw.dtype} in {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    elif raw.ndim == 3 and raw.shape[2] == 3:
        raw = raw[:, :, ::-1]  # BGR -> RGB
    else:
        raise ValueError(f"unsupported channel layout {raw.shape} in {path}")
    if raw.shape[0] == 0 or raw.shape[1] == 0:
        raise ValueError(f"zero-dimension image: {path}")
    return raw.astype(np.float64) / maxval


def save_image(img: np.ndarray, path: str) -> None:
    """Write an image as an 8-bit PNG.

    Intensities are clamped to [0, 1] and quantized by round(v * 255)
    with round-half-away-from-zero.
    """
    validate_image(img)
    v = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    # half-away-from-zero; values are non-negative after the clamp
    q = np.floor(v * 255.0 + 0.5).astype(np.uint8)
    if q.shape[2] == 3:
        q = q[:, :, ::-1]  # RGB -> BGR
    else:
        q = q[:, :, 0]
    if not cv2.imwrite(path, q):
        raise OSError(f"cannot write image: {path}")


def to_luminance(img: np.ndarray) -> np.ndarray:
    """BT.601 studio-swing luminance of an RGB image, as (H, W, 1) in [0, 1]."""
    validate_image(img)
    if img.shape[2] != 3:
        raise ValueError("to_luminance expects a 3-channel image")
    r, g, b = img[:, :, 0], img[:, :, 1], img[:, :, 2]
    y = (_LUMA_R * r * 255.0 + _LUMA_G * g * 255.0 + _LUMA_B * b * 255.0) / 256.0 + 16.0
    return (y / 255.0)[:, :, None]


def random_patch(img: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Crop a size x size patch at a uniformly random top-left corner.

    Draw order is fixed: top first, then left.
    """
    validate_image(img)
    h, w = img.shape[:2]
    if size > h or size > w:
        raise ValueError(f"patch size {size} exceeds image dims {h}x{w}")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return img[top : top + size, left : left + size]


def dihedral(img: np.ndarray, k: int) -> np.ndarray:
    """Apply one of the 8 symmetries of the square.

    k in [0, 7] selects rot90^(k mod 4) (counter-clockwise) applied after a
    horizontal flip iff k >= 4.  k = 0 is the identity.
    """
    validate_image(img)
    if not 0 <= k <= 7:
        raise ValueError(f"dihedral index {k} outside [0, 7]")
    out = img[:, ::-1] if k >= 4 else img
    return np.ascontiguousarray(np.rot90(out, k % 4, axes=(0, 1)))
