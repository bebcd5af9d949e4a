#!/usr/bin/env python3
"""Self-supervised training on a single image, end to end.

No high-resolution target is ever shown to the model: every batch is
random augmented patches of one low-resolution image, and the two
reconstruction chains supervise each other.  After training, upscaling
the same image beats plain bicubic interpolation.

This demo uses a reduced setup (small model, few steps) so it finishes in
about a minute; raise STEPS for a better model.
"""

import os
import time

import numpy as np

from icfsr import ModelConfig, TrainConfig, bicubic_resize, forward, psnr, save_image, train

STEPS = int(os.environ.get("STEPS", "60"))
out_dir = "demo_output/03"
os.makedirs(out_dir, exist_ok=True)

# ground truth: a structured texture; the training input is its bicubic
# half-resolution version, and the HR original is used only for reporting
y, x = np.mgrid[0:192, 0:192].astype(np.float64)
r = np.hypot(y - 80, x - 100)
hr = np.stack(
    [
        0.5 + 0.45 * np.sin(0.02 * r * r / (1 + 0.01 * r)),
        0.5 + 0.45 * np.sin(2 * np.pi * (x + y) * 0.06),
        0.5 + 0.45 * np.cos(2 * np.pi * x * 0.05),
    ],
    axis=2,
)
hr = np.clip(hr, 0, 1)
lr = bicubic_resize(hr, 0.5)
save_image(hr, f"{out_dir}/hr.png")
save_image(lr, f"{out_dir}/lr.png")

cfg = TrainConfig(epochs=1, steps_per_epoch=STEPS, seed=7, batch_size=8)
model_cfg = ModelConfig(n_resblocks=4, n_channels=16, scale_set=(2,))

losses = []
t0 = time.time()
ckpt = train([lr], cfg, model_cfg=model_cfg, on_step=lambda e, s, rep, lr_: losses.append(rep.l_total))
print(f"trained {STEPS} steps in {time.time() - t0:.0f}s")
print(f"loss: first {losses[0]:.4f} -> last {losses[-1]:.4f} ({losses[-1] / losses[0]:.0%})")

sr = forward(ckpt.params, lr, 2)
save_image(sr, f"{out_dir}/sr.png")
save_image(bicubic_resize(lr, 2), f"{out_dir}/bicubic.png")

print(f"bicubic x2 PSNR: {psnr(bicubic_resize(lr, 2), hr, mode='y', shave=2):6.2f} dB")
print(f"model   x2 PSNR: {psnr(sr, hr, mode='y', shave=2):6.2f} dB")

# the consistency property the training optimizes, now measurable directly
round_trip = forward(ckpt.params, forward(ckpt.params, lr, 1 / 2), 2)
print(f"round-trip f(f(x|1/2)|2) PSNR vs x: {psnr(round_trip, lr, mode='y'):6.2f} dB")
