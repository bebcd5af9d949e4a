#!/usr/bin/env python3
"""Classical resampling walkthrough.

Builds a synthetic test card, then compares the non-learnable resamplers:
bicubic and nearest resizing (up and down), Gaussian pre-blur, and average
pooling.  Outputs land in demo_output/01/.
"""

import os

import numpy as np

from icfsr import (
    avg_pool,
    bicubic_resize,
    gaussian_blur,
    nearest_resize,
    psnr,
    save_image,
)

out_dir = "demo_output/01"
os.makedirs(out_dir, exist_ok=True)

# A test card with rings and a frequency sweep: enough structure to make
# interpolation differences visible.
y, x = np.mgrid[0:128, 0:128].astype(np.float64)
r = np.hypot(y - 64, x - 64)
card = np.stack(
    [
        0.5 + 0.5 * np.sin(0.35 * r),
        0.5 + 0.5 * np.sin(2 * np.pi * x * x / 2800),
        0.5 + 0.5 * np.sin(2 * np.pi * y / 16),
    ],
    axis=2,
)
save_image(card, f"{out_dir}/card.png")

# Down-sample by 2 with each operator, then bicubic back up and compare.
print("down-up round trips on the test card (PSNR, luminance, 2px shave):")
for label, down in [
    ("bicubic", bicubic_resize(card, 0.5)),
    ("nearest", nearest_resize(card, 0.5)),
    ("gaussian+bicubic", bicubic_resize(gaussian_blur(card, 0.4), 0.5)),
    ("gaussian+nearest", nearest_resize(gaussian_blur(card, 0.4), 0.5)),
]:
    save_image(down, f"{out_dir}/down_{label.replace('+', '_')}.png")
    up = bicubic_resize(down, 2)
    print(f"  {label:18s} {psnr(up, card, mode='y', shave=2):6.2f} dB")

# Average pooling is the low-pass operator used by the color loss.
pooled = avg_pool(card, 4, 4)
save_image(pooled, f"{out_dir}/avg_pool_4.png")
print(f"avg_pool 4x4: {card.shape[:2]} -> {pooled.shape[:2]}")

# Upscaling comparison: nearest blocks vs bicubic smoothing.
save_image(nearest_resize(card, 2), f"{out_dir}/up_nearest.png")
save_image(bicubic_resize(card, 2), f"{out_dir}/up_bicubic.png")
print(f"wrote outputs under {out_dir}/")
