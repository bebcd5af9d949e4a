"""Self-supervised training objectives.

All norms are mean-reduced L1 distances, which keeps the color weight
scale-free across patch sizes.  ``color_loss`` compares average-pooled
(low-frequency) versions of the intermediate outputs against the input,
with window/stride pairs chosen so both sides pool to the same grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .resample import avg_pool

__all__ = ["LossReport", "consistency_loss", "color_loss", "total_loss"]


@dataclass
class LossReport:
    l_cons: float
    l_color: float
    l_total: float
    lambda_color: float
    per_scale: dict = field(default_factory=dict)


def _l1(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean())


def consistency_loss(x_hat: np.ndarray, x_check: np.ndarray, x: np.ndarray) -> float:
    """Mean L1 distance of both reconstruction-chain outputs to the input."""
    return _l1(x_hat, x) + _l1(x_check, x)


def color_loss(x_s: np.ndarray, x_inv: np.ndarray, x: np.ndarray, s: int) -> float:
    """Low-frequency color mismatch of the first-pass outputs.

    Pools x_s with window 4s against x with window 4, and x_inv with
    window 4 against x with window 4s; requires the input dims divisible
    by 4s so every pooling is exact.
    """
    if s < 2 or int(s) != s:
        raise ValueError(f"color_loss needs an integer scale >= 2, got {s}")
    s = int(s)
    h, w = x.shape[:2]
    if h % (4 * s) or w % (4 * s):
        raise ValueError(f"input dims {h}x{w} not divisible by {4 * s}")
    if x_s.shape[:2] != (s * h, s * w):
        raise ValueError(f"x_s dims {x_s.shape[:2]} do not match scale {s}")
    if x_inv.shape[:2] != (h // s, w // s):
        raise ValueError(f"x_inv dims {x_inv.shape[:2]} do not match scale 1/{s}")
    term_up = _l1(avg_pool(x_s, 4 * s, 4 * s), avg_pool(x, 4, 4))
    term_down = _l1(avg_pool(x_inv, 4, 4), avg_pool(x, 4 * s, 4 * s))
    return term_up + term_down


def total_loss(l_cons: float, l_color: float, lambda_color: float) -> float:
    return l_cons + lambda_color * l_color
