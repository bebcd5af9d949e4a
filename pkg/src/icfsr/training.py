"""Two-stage self-supervised training loop.

Each step runs two chains per scale: up-down (resize by s, then back by
1/s) and down-up (1/s, then s).  The first-pass outputs are detached
before re-entering the network, so the consistency loss trains only the
second applications while the color loss trains the first.  Both chains
share one evaluation of the trunk on the input batch.

Second passes are evaluated in fixed-size batch chunks so large
intermediate scales stay within memory; chunking is a pure function of
the shapes involved and does not change any result beyond float
summation order, which is itself deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .image_io import dihedral, make_rng, random_patch
from .losses import LossReport
from .model import (
    ModelConfig,
    ModelParameters,
    body_features,
    init_parameters,
    tail_down,
    tail_up,
)

__all__ = [
    "TrainConfig",
    "AdamState",
    "init_adam",
    "adam_update",
    "lr_for_epoch",
    "train_step",
    "train_step_multiscale",
    "train",
]

# second passes are chunked so one sample plane stays under this many values
_CHUNK_TARGET = 8_000_000


@dataclass(frozen=True)
class TrainConfig:
    patch_size: int = 48
    batch_size: int = 16
    lambda_color: float = 0.2
    lr_init: float = 1e-4
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 200
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 1
    seed: int = 0
    scale_set: tuple = (2,)
    steps_per_epoch: int = 100
    precision: int = 32

    def __post_init__(self):
        object.__setattr__(self, "scale_set", tuple(int(s) for s in self.scale_set))
        if self.patch_size % max(self.scale_set):
            raise ValueError("patch_size must be divisible by the largest scale")
        if self.patch_size % 4:
            raise ValueError("patch_size must be divisible by 4")
        if self.precision not in (32, 64):
            raise ValueError("precision must be 32 or 64")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    @property
    def dtype(self):
        return np.float32 if self.precision == 32 else np.float64


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0


def init_adam(params: ModelParameters) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(t) for k, t in params.tensors.items()},
        v={k: np.zeros_like(t) for k, t in params.tensors.items()},
    )


def adam_update(
    params: ModelParameters, opt: AdamState, grads: dict, lr: float, cfg: TrainConfig
) -> tuple:
    """One Adam step; returns fresh (params, opt) without mutating inputs."""
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    step = opt.step + 1
    new_t, new_m, new_v = {}, {}, {}
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    for name, t in params.tensors.items():
        g = grads[name]
        m = b1 * opt.m[name] + (1.0 - b1) * g
        v = b2 * opt.v[name] + (1.0 - b2) * g * g
        new_t[name] = t - (lr / c1) * m / (np.sqrt(v / c2) + eps)
        new_m[name] = m
        new_v[name] = v
    return ModelParameters(params.config, new_t), AdamState(new_m, new_v, step)


def lr_for_epoch(cfg: TrainConfig, epoch: int) -> float:
    """Learning rate during the given (0-based) epoch; halves every
    lr_decay_every epochs."""
    return cfg.lr_init * cfg.lr_decay_factor ** (epoch // cfg.lr_decay_every)


def _pool_pair(var_a: ad.Var, var_b: ad.Var, win_a: int, win_b: int) -> ad.Var:
    return ad.l1_mean(ad.avg_pool_nhwc(var_a, win_a), ad.avg_pool_nhwc(var_b, win_b))


def _color_terms(x_s: ad.Var, x_inv: ad.Var, x: ad.Var, s: int) -> ad.Var:
    """Taped color loss with the canonical (4s, 4) windows, falling back to
    full-frame pooling for a term whose canonical windows do not divide the
    patch (only possible when patch_size % 4s != 0)."""
    h, w = x.value.shape[1:3]
    if h % 4 == 0 and w % 4 == 0:
        t_up = _pool_pair(x_s, x, 4 * s, 4)
    else:
        t_up = _pool_pair(x_s, x, x_s.value.shape[1], h)
    if h % (4 * s) == 0 and w % (4 * s) == 0:
        t_down = _pool_pair(x_inv, x, 4, 4 * s)
    else:
        t_down = _pool_pair(x_inv, x, x_inv.value.shape[1], h)
    return ad.add_scalar_vars([t_up, t_down])


def _chunk_sizes(n: int, h: int, w: int, c: int) -> list:
    per_sample = h * w * c
    size = max(1, _CHUNK_TARGET // per_sample)
    return [min(size, n - i) for i in range(0, n, size)]


def _second_pass_loss(
    pvars: dict,
    first_out: np.ndarray,
    x_np: np.ndarray,
    mode: str,
    k: int,
    cfg: ModelConfig,
) -> float:
    """Mean L1 between f(detach(first_out) | condition) and the input batch,
    evaluated chunk-wise; backpropagates into pvars and returns the value."""
    n = first_out.shape[0]
    total = 0.0
    pos = 0
    for size in _chunk_sizes(n, *first_out.shape[1:]):
        src = ad.constant(first_out[pos : pos + size])
        ref = ad.constant(x_np[pos : pos + size])
        feats = body_features(pvars, src, cfg)
        if mode == "up":
            out = tail_up(pvars, feats, src, k)
        else:
            out = tail_down(pvars, feats, src, k)
        term = ad.l1_mean(out, ref)
        weight = size / n
        if any(v.requires_grad for v in pvars.values()):
            term.backward(seed=np.asarray(weight, dtype=term.value.dtype))
        total += weight * float(term.value)
        pos += size
    return total


def step_gradients(
    params: ModelParameters,
    batch: np.ndarray,
    scales,
    lambda_color: float,
    chains: tuple = ("ud", "du"),
) -> tuple:
    """Losses and parameter gradients of one optimization step.

    ``batch`` is (N, P, P, 3) in the parameter dtype.  ``chains`` selects
    which of the up-down ("ud") and down-up ("du") chains contribute; the
    full step uses both.  Returns (LossReport, grads dict).
    """
    cfg = params.config
    pvars = {name: ad.parameter(t) for name, t in params.tensors.items()}
    x = ad.constant(batch)

    feats = body_features(pvars, x, cfg)
    first = {}
    for s in scales:
        first[s] = (tail_up(pvars, feats, x, s), tail_down(pvars, feats, x, s))

    per_scale = {}
    color_vars = []
    l_cons = 0.0
    for s in scales:
        x_s, x_inv = first[s]
        cons_s = 0.0
        if "ud" in chains:
            cons_s += _second_pass_loss(pvars, x_s.value, batch, "down", s, cfg)
        if "du" in chains:
            cons_s += _second_pass_loss(pvars, x_inv.value, batch, "up", s, cfg)
        color_var = _color_terms(x_s, x_inv, x, s)
        color_vars.append(color_var)
        per_scale[s] = {"l_cons": cons_s, "l_color": float(color_var.value)}
        l_cons += cons_s

    color_total = ad.add_scalar_vars(color_vars)
    if lambda_color != 0.0:
        color_total.backward(
            seed=np.asarray(lambda_color, dtype=color_total.value.dtype)
        )
    l_color = float(color_total.value)
    l_total = l_cons + lambda_color * l_color

    grads = {
        name: (v.grad if v.grad is not None else np.zeros_like(v.value))
        for name, v in pvars.items()
    }
    report = LossReport(l_cons, l_color, l_total, lambda_color, per_scale)
    return report, grads


def _stack_batch(batch, cfg: TrainConfig, dtype) -> np.ndarray:
    arr = np.stack([np.asarray(p) for p in batch]).astype(dtype)
    if arr.ndim != 4 or arr.shape[1:] != (cfg.patch_size, cfg.patch_size, 3):
        raise ValueError(
            f"expected patches of shape ({cfg.patch_size}, {cfg.patch_size}, 3)"
        )
    return arr


def train_step(
    params: ModelParameters,
    opt: AdamState,
    batch,
    s: int,
    cfg: TrainConfig,
    lr: float | None = None,
) -> tuple:
    """Single-scale optimization step; returns (params', opt', LossReport)."""
    if s not in params.config.scale_set:
        raise ValueError(f"scale {s} not in the model's scale set")
    arr = _stack_batch(batch, cfg, params.dtype)
    report, grads = step_gradients(params, arr, (s,), cfg.lambda_color)
    if not np.isfinite(report.l_total):
        return params, opt, report
    new_params, new_opt = adam_update(
        params, opt, grads, cfg.lr_init if lr is None else lr, cfg
    )
    return new_params, new_opt, report


def train_step_multiscale(
    params: ModelParameters,
    opt: AdamState,
    batch,
    cfg: TrainConfig,
    lr: float | None = None,
) -> tuple:
    """Runs the chains for every configured scale and applies one update."""
    for s in cfg.scale_set:
        if s not in params.config.scale_set:
            raise ValueError(f"scale {s} not in the model's scale set")
    arr = _stack_batch(batch, cfg, params.dtype)
    report, grads = step_gradients(params, arr, cfg.scale_set, cfg.lambda_color)
    if not np.isfinite(report.l_total):
        return params, opt, report
    new_params, new_opt = adam_update(
        params, opt, grads, cfg.lr_init if lr is None else lr, cfg
    )
    return new_params, new_opt, report


def _draw_batch(dataset, cfg: TrainConfig, rng) -> list:
    """Image-uniform, then position-uniform, then a random dihedral move.

    Per sample the draw order is: image index, patch corner (top, left),
    augmentation index.
    """
    batch = []
    for _ in range(cfg.batch_size):
        idx = int(rng.integers(0, len(dataset)))
        patch = random_patch(dataset[idx], cfg.patch_size, rng)
        k = int(rng.integers(0, 8))
        batch.append(dihedral(patch, k))
    return batch


def steps_per_epoch_auto(dataset, cfg: TrainConfig) -> int:
    """ceil(available non-overlapping patches / batch size)."""
    total = sum(
        (img.shape[0] // cfg.patch_size) * (img.shape[1] // cfg.patch_size)
        for img in dataset
    )
    return max(1, math.ceil(total / cfg.batch_size))


def train(
    dataset,
    cfg: TrainConfig,
    model_cfg: ModelConfig | None = None,
    out_dir=None,
    checkpoint_every: int = 0,
    resume=None,
    on_step=None,
):
    """Full training loop; returns the final Checkpoint.

    ``dataset`` is a non-empty list of (H, W, 3) images; a single image is
    a valid dataset.  With ``out_dir`` set, checkpoints are written every
    ``checkpoint_every`` epochs (0 = only the final one) plus a final one.
    ``on_step(epoch, step, report, lr)`` is called after every step.
    A non-finite loss rejects the step and redraws the batch, aborting
    after 3 consecutive retries.
    """
    from .checkpoint import Checkpoint, save_checkpoint, train_config_digest

    if not dataset:
        raise ValueError("dataset must contain at least one image")
    for img in dataset:
        if img.shape[0] < cfg.patch_size or img.shape[1] < cfg.patch_size:
            raise ValueError(
                f"dataset image {img.shape[:2]} smaller than patch size {cfg.patch_size}"
            )
    if model_cfg is None:
        model_cfg = ModelConfig(scale_set=cfg.scale_set)
    for s in cfg.scale_set:
        if s not in model_cfg.scale_set:
            raise ValueError(f"training scale {s} missing from the model's tails")

    steps = cfg.steps_per_epoch if cfg.steps_per_epoch > 0 else steps_per_epoch_auto(dataset, cfg)
    digest = train_config_digest(cfg)

    if resume is not None:
        if resume.train_digest != digest:
            raise ValueError("checkpoint was produced by a different TrainConfig")
        params = resume.params
        opt = resume.opt
        start_epoch = resume.epoch
        rng = make_rng(0)
        rng.bit_generator.state = resume.rng_state
    else:
        params = init_parameters(model_cfg, cfg.seed, dtype=cfg.dtype)
        opt = init_adam(params)
        start_epoch = 0
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=(cfg.seed, 1)))
        )

    multi = len(cfg.scale_set) > 1
    for epoch in range(start_epoch, cfg.epochs):
        lr = lr_for_epoch(cfg, epoch)
        for step in range(steps):
            for attempt in range(4):
                batch = _draw_batch(dataset, cfg, rng)
                if multi:
                    params2, opt2, report = train_step_multiscale(params, opt, batch, cfg, lr)
                else:
                    params2, opt2, report = train_step(
                        params, opt, batch, cfg.scale_set[0], cfg, lr
                    )
                if np.isfinite(report.l_total):
                    params, opt = params2, opt2
                    break
                if attempt == 3:
                    raise RuntimeError(
                        f"non-finite loss persisted for 3 retries at epoch {epoch} step {step}"
                    )
            if on_step is not None:
                on_step(epoch, step, report, lr)
        if out_dir is not None and checkpoint_every and (epoch + 1) % checkpoint_every == 0:
            ckpt = Checkpoint(
                params.config, params, opt, epoch + 1, rng.bit_generator.state, digest
            )
            save_checkpoint(ckpt, f"{out_dir}/checkpoint_ep{epoch + 1:04d}.ckpt")

    ckpt = Checkpoint(
        params.config, params, opt, cfg.epochs, rng.bit_generator.state, digest
    )
    if out_dir is not None:
        save_checkpoint(ckpt, f"{out_dir}/checkpoint_final.ckpt")
    return ckpt
