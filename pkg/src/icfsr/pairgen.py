"""Synthesize paired training data with the learned down-sampler.

``generate_llr_lr`` pairs each LR image with its down-scaled counterpart
f(X | 1/s); ``generate_lr_hr`` does the same for HR inputs.  Inputs whose
dims are not divisible by s are center-cropped to the largest divisible
size with a warning.  ``export_dataset`` writes the standard
LR/ + HR/ + manifest.tsv layout with 8-bit quantization applied once.
"""

from __future__ import annotations

import os
import warnings
from fractions import Fraction

from .image_io import save_image
from .model import ModelParameters, forward

__all__ = ["generate_llr_lr", "generate_lr_hr", "export_dataset", "center_crop_divisible"]


def center_crop_divisible(img, s: int):
    """Largest center crop whose dims are divisible by s."""
    h, w = img.shape[:2]
    h2, w2 = h - h % s, w - w % s
    if h2 == 0 or w2 == 0:
        raise ValueError(f"image {h}x{w} too small for scale {s}")
    if (h2, w2) != (h, w):
        warnings.warn(
            f"center-cropping {h}x{w} to {h2}x{w2} for divisibility by {s}",
            stacklevel=2,
        )
        top, left = (h - h2) // 2, (w - w2) // 2
        img = img[top : top + h2, left : left + w2]
    return img


def _generate(params: ModelParameters, images, s: int) -> list:
    if s not in params.config.scale_set:
        raise ValueError(f"scale {s} not in the model's scale set")
    pairs = []
    for img in images:
        img = center_crop_divisible(img, s)
        small = forward(params, img, Fraction(1, s))
        pairs.append((small, img))
    return pairs


def generate_llr_lr(params: ModelParameters, lr_images, s: int) -> list:
    """(f(X | 1/s), X) pairs from LR inputs, for training an up-scaler."""
    return _generate(params, lr_images, s)


def generate_lr_hr(params: ModelParameters, hr_images, s: int) -> list:
    """(f(HR | 1/s), HR) pairs from HR inputs."""
    return _generate(params, hr_images, s)


def export_dataset(pairs, out_dir: str, naming: str = "{index:04d}") -> str:
    """Write pairs as out_dir/LR/<stem>.png + out_dir/HR/<stem>.png and a
    manifest.tsv of (stem, lr_dims, hr_dims, scale); returns the manifest
    path.  Stems are derived from ``naming`` and must be unique."""
    lr_dir = os.path.join(out_dir, "LR")
    hr_dir = os.path.join(out_dir, "HR")
    os.makedirs(lr_dir, exist_ok=True)
    os.makedirs(hr_dir, exist_ok=True)
    rows = []
    seen = set()
    for index, (small, big) in enumerate(pairs):
        stem = naming.format(index=index)
        if stem in seen:
            raise ValueError(f"stem collision in export: {stem!r}")
        seen.add(stem)
        if big.shape[0] % small.shape[0] or big.shape[1] % small.shape[1]:
            raise ValueError(
                f"pair {stem}: dims {small.shape[:2]} vs {big.shape[:2]} "
                "are not an integer ratio"
            )
        scale = big.shape[0] // small.shape[0]
        if scale != big.shape[1] // small.shape[1]:
            raise ValueError(f"pair {stem}: anisotropic scale ratio")
        save_image(small, os.path.join(lr_dir, stem + ".png"))
        save_image(big, os.path.join(hr_dir, stem + ".png"))
        rows.append(
            (
                stem,
                f"{small.shape[0]}x{small.shape[1]}",
                f"{big.shape[0]}x{big.shape[1]}",
                str(scale),
            )
        )
    manifest = os.path.join(out_dir, "manifest.tsv")
    with open(manifest, "w") as fh:
        fh.write("stem\tlr_dims\thr_dims\tscale\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")
    return manifest
