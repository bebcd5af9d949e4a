"""The invertible scale-conditional network.

A shared convolutional trunk (head + residual body) feeds per-scale tails:
an up tail (expand conv, pixel shuffle, projection conv) for condition s and
a down tail (pixel unshuffle, projection conv) for condition 1/s.  The tail
output is a residual added to a bicubic resize of the input, and condition
s = 1 bypasses the network entirely.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import autodiff as ad
from .image_io import make_rng
from .resample import resize_matrix

__all__ = [
    "ModelConfig",
    "ModelParameters",
    "Tape",
    "init_parameters",
    "forward",
    "forward_train",
    "normalize_scale",
    "pixel_shuffle",
    "pixel_unshuffle",
]


@dataclass(frozen=True)
class ModelConfig:
    n_resblocks: int = 8
    n_channels: int = 32
    scale_set: tuple = (2,)
    conv_kernel: int = 3
    residual_scaling: float = 1.0

    def __post_init__(self):
        ss = tuple(int(s) for s in self.scale_set)
        object.__setattr__(self, "scale_set", ss)
        if not ss:
            raise ValueError("scale_set must not be empty")
        if any(s < 2 for s in ss):
            raise ValueError("scales must be integers >= 2")
        if list(ss) != sorted(set(ss)):
            raise ValueError("scale_set must be strictly increasing")
        if self.conv_kernel != 3:
            raise ValueError("only 3x3 convolutions are supported")
        if self.n_resblocks < 1 or self.n_channels < 1:
            raise ValueError("n_resblocks and n_channels must be positive")


def parameter_shapes(cfg: ModelConfig) -> list:
    """Ordered (name, shape) list; the order fixes initialization draws."""
    c = cfg.n_channels
    shapes = [("head.w", (c, 3, 3, 3)), ("head.b", (c,))]
    for i in range(cfg.n_resblocks):
        shapes += [
            (f"body.{i}.c1.w", (c, c, 3, 3)),
            (f"body.{i}.c1.b", (c,)),
            (f"body.{i}.c2.w", (c, c, 3, 3)),
            (f"body.{i}.c2.b", (c,)),
        ]
    shapes += [("body.close.w", (c, c, 3, 3)), ("body.close.b", (c,))]
    for s in cfg.scale_set:
        shapes += [
            (f"up{s}.expand.w", (c * s * s, c, 3, 3)),
            (f"up{s}.expand.b", (c * s * s,)),
            (f"up{s}.out.w", (3, c, 3, 3)),
            (f"up{s}.out.b", (3,)),
            (f"down{s}.out.w", (3, c * s * s, 3, 3)),
            (f"down{s}.out.b", (3,)),
        ]
    return shapes


@dataclass
class ModelParameters:
    config: ModelConfig
    tensors: dict = field(default_factory=dict)

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype

    def copy(self) -> "ModelParameters":
        return ModelParameters(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "ModelParameters":
        return ModelParameters(
            self.config, {k: v.astype(dtype) for k, v in self.tensors.items()}
        )


def init_parameters(cfg: ModelConfig, seed: int, dtype=np.float32) -> ModelParameters:
    """Weights uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.

    Draws come from a PCG64 stream in parameter_shapes order, filling each
    tensor in C order, so a (cfg, seed) pair is fully reproducible.
    """
    rng = make_rng(seed)
    tensors = {}
    for name, shape in parameter_shapes(cfg):
        if name.endswith(".b"):
            tensors[name] = np.zeros(shape, dtype=dtype)
        else:
            fan_in = shape[1] * shape[2] * shape[3]
            bound = 1.0 / np.sqrt(fan_in)
            tensors[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return ModelParameters(cfg, tensors)


def normalize_scale(s, scale_set) -> tuple:
    """Map a scale condition to ("id", 1), ("up", k) or ("down", k)."""
    if isinstance(s, Fraction):
        if s == 1:
            return ("id", 1)
        if s.numerator == 1 and s.denominator in scale_set:
            return ("down", s.denominator)
        if s.denominator == 1 and s.numerator in scale_set:
            return ("up", s.numerator)
    elif isinstance(s, (int, np.integer)):
        if s == 1:
            return ("id", 1)
        if s in scale_set:
            return ("up", int(s))
    elif isinstance(s, float):
        if s == 1.0:
            return ("id", 1)
        for k in scale_set:
            if s == k:
                return ("up", k)
            if abs(s - 1.0 / k) < 1e-12:
                return ("down", k)
    raise ValueError(f"scale {s!r} not in the configured set {scale_set} or its reciprocals")


@functools.lru_cache(maxsize=64)
def _resize_mats(h: int, w: int, num: int, den: int):
    s = Fraction(num, den)
    return resize_matrix(h, s, "bicubic"), resize_matrix(w, s, "bicubic")


def body_features(p: dict, x: ad.Var, cfg: ModelConfig) -> ad.Var:
    """Head conv and residual body with the global feature skip."""
    h = ad.conv2d(x, p["head.w"], p["head.b"])
    z = h
    for i in range(cfg.n_resblocks):
        r = ad.conv2d(z, p[f"body.{i}.c1.w"], p[f"body.{i}.c1.b"], fuse_relu=True)
        r = ad.conv2d(r, p[f"body.{i}.c2.w"], p[f"body.{i}.c2.b"])
        if cfg.residual_scaling != 1.0:
            r = ad.mul_scalar(r, cfg.residual_scaling)
        z = ad.add(z, r)
    z = ad.conv2d(z, p["body.close.w"], p["body.close.b"])
    return ad.add(z, h)


def _bicubic_skip(x: ad.Var, num: int, den: int) -> ad.Var:
    n, h, w, c = x.value.shape
    rmat, cmat = _resize_mats(h, w, num, den)
    return ad.resize_separable(x, rmat, cmat)


def tail_up(p: dict, feats: ad.Var, x: ad.Var, s: int) -> ad.Var:
    t = ad.conv2d(feats, p[f"up{s}.expand.w"], p[f"up{s}.expand.b"])
    t = ad.pixel_shuffle_nhwc(t, s)
    t = ad.conv2d(t, p[f"up{s}.out.w"], p[f"up{s}.out.b"])
    return ad.add(t, _bicubic_skip(x, s, 1))


def tail_down(p: dict, feats: ad.Var, x: ad.Var, s: int) -> ad.Var:
    t = ad.pixel_unshuffle_nhwc(feats, s)
    t = ad.conv2d(t, p[f"down{s}.out.w"], p[f"down{s}.out.b"])
    return ad.add(t, _bicubic_skip(x, 1, s))


def apply_network(p: dict, x: ad.Var, mode: str, k: int, cfg: ModelConfig) -> ad.Var:
    feats = body_features(p, x, cfg)
    if mode == "up":
        return tail_up(p, feats, x, k)
    return tail_down(p, feats, x, k)


@dataclass
class Tape:
    """Recorded computation: backward on a scalar built from ``output``
    fills gradients of the wrapped parameters and input."""

    output: ad.Var
    params: dict
    x: ad.Var

    def param_grads(self) -> dict:
        return {
            name: (v.grad if v.grad is not None else np.zeros_like(v.value))
            for name, v in self.params.items()
        }


def _check_scale_dims(mode: str, k: int, h: int, w: int) -> None:
    if mode == "down" and (h % k or w % k):
        raise ValueError(f"dims {h}x{w} not divisible by {k} for down-scaling")


def _as_batch(x: np.ndarray, dtype) -> np.ndarray:
    if x.ndim != 3 or x.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) image")
    return np.ascontiguousarray(x[None], dtype=dtype)


def forward(params: ModelParameters, x: np.ndarray, s) -> np.ndarray:
    """Resize x by the scale condition s; s = 1 returns x unchanged."""
    mode, k = normalize_scale(s, params.config.scale_set)
    if mode == "id":
        return x
    h, w = x.shape[:2]
    _check_scale_dims(mode, k, h, w)
    p = {name: ad.Var(t) for name, t in params.tensors.items()}
    out = apply_network(p, ad.Var(_as_batch(x, params.dtype)), mode, k, params.config)
    return out.value[0].astype(np.float64)


def forward_train(params: ModelParameters, x: np.ndarray, s) -> tuple:
    """As forward, but returns (output image, Tape) for reverse-mode use."""
    mode, k = normalize_scale(s, params.config.scale_set)
    pvars = {name: ad.parameter(t) for name, t in params.tensors.items()}
    xvar = ad.parameter(_as_batch(x, params.dtype))
    if mode == "id":
        out = ad.add(xvar, ad.constant(np.zeros_like(xvar.value)))
        return x, Tape(out, pvars, xvar)
    h, w = x.shape[:2]
    _check_scale_dims(mode, k, h, w)
    out = apply_network(pvars, xvar, mode, k, params.config)
    return out.value[0].astype(np.float64), Tape(out, pvars, xvar)


def pixel_shuffle(features: np.ndarray, s: int) -> np.ndarray:
    """(C*s^2, H, W) -> (C, s*H, s*W) with
    out[c, s*y+dy, s*x+dx] = in[c*s^2 + dy*s + dx, y, x]."""
    c2, h, w = features.shape
    if c2 % (s * s):
        raise ValueError(f"channel count {c2} not divisible by {s}^2")
    c = c2 // (s * s)
    v = features.reshape(c, s, s, h, w)
    v = v.transpose(0, 3, 1, 4, 2)  # (c, h, s, w, s)
    return np.ascontiguousarray(v.reshape(c, h * s, w * s))


def pixel_unshuffle(features: np.ndarray, s: int) -> np.ndarray:
    """(C, H, W) -> (C*s^2, H/s, W/s), the exact inverse of pixel_shuffle."""
    c, h, w = features.shape
    if h % s or w % s:
        raise ValueError(f"dims {h}x{w} not divisible by {s}")
    v = features.reshape(c, h // s, s, w // s, s)
    v = v.transpose(0, 2, 4, 1, 3)  # (c, s, s, h/s, w/s)
    return np.ascontiguousarray(v.reshape(c * s * s, h // s, w // s))
