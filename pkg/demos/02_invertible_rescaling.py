#!/usr/bin/env python3
"""The scale-conditional network before any training.

One network resizes in both directions depending on the scale condition:
f(x, 2) doubles the resolution, f(x, 1/2) halves it, and f(x, 1) is the
identity by construction.  At random initialization the output is the
bicubic resize of the input plus a small random residual, so the chains
f(f(x|2)|1/2) and f(f(x|1/2)|2) already land near x; training tightens
them (see demo 03).
"""

import numpy as np

from icfsr import ModelConfig, forward, init_parameters, psnr

rng = np.random.default_rng(0)
x = rng.random((64, 64, 3))

params = init_parameters(ModelConfig(n_resblocks=4, n_channels=16, scale_set=(2,)), seed=42)

up = forward(params, x, 2)
down = forward(params, x, 1 / 2)
same = forward(params, x, 1)
print(f"x: {x.shape}  f(x|2): {up.shape}  f(x|1/2): {down.shape}")
print(f"f(x|1) is x exactly: {same is x}")

# the up-down and down-up chains at random init
up_down = forward(params, up, 1 / 2)
down_up = forward(params, down, 2)
print(f"up-down chain PSNR vs x: {psnr(up_down, x, mode='rgb'):6.2f} dB")
print(f"down-up chain PSNR vs x: {psnr(down_up, x, mode='rgb'):6.2f} dB")

# the residual branch is small at init: compare against plain bicubic
from icfsr import bicubic_resize

residual = up - bicubic_resize(x, 2)
print(f"mean |network residual| at init: {np.abs(residual).mean():.4f}")
