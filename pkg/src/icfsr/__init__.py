"""Self-supervised single-image super-resolution with an invertible
scale-conditional network, plus classical baselines and evaluation metrics."""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .image_io import dihedral, load_image, make_rng, random_patch, save_image, to_luminance
from .losses import LossReport, color_loss, consistency_loss, total_loss
from .metrics import error_map, mae, psnr, ssim, write_report
from .model import (
    ModelConfig,
    ModelParameters,
    forward,
    forward_train,
    init_parameters,
    pixel_shuffle,
    pixel_unshuffle,
)
from .pairgen import export_dataset, generate_llr_lr, generate_lr_hr
from .resample import avg_pool, bicubic_resize, gaussian_blur, nearest_resize
from .training import (
    AdamState,
    TrainConfig,
    init_adam,
    lr_for_epoch,
    train,
    train_step,
    train_step_multiscale,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Checkpoint",
    "CheckpointError",
    "LossReport",
    "ModelConfig",
    "ModelParameters",
    "TrainConfig",
    "avg_pool",
    "bicubic_resize",
    "color_loss",
    "consistency_loss",
    "dihedral",
    "error_map",
    "export_dataset",
    "forward",
    "forward_train",
    "gaussian_blur",
    "generate_llr_lr",
    "generate_lr_hr",
    "init_adam",
    "init_parameters",
    "load_checkpoint",
    "load_image",
    "lr_for_epoch",
    "mae",
    "make_rng",
    "nearest_resize",
    "pixel_shuffle",
    "pixel_unshuffle",
    "psnr",
    "random_patch",
    "save_checkpoint",
    "save_image",
    "ssim",
    "to_luminance",
    "total_loss",
    "train",
    "train_step",
    "train_step_multiscale",
    "write_report",
]
