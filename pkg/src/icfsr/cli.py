"""Command-line interface.

Subcommands: train, sr, downsample, eval, baseline, gen-pairs.  Exit codes:
0 success, 1 runtime failure, 2 usage/config error, 3 data error.  Logs go
to stderr; reports go to files, or stdout with --stdout.  The ICF_THREADS
environment variable caps compute worker threads.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields
from fractions import Fraction


log = logging.getLogger("icfsr")


class UsageError(Exception):
    exit_code = 2


class DataError(Exception):
    exit_code = 3


def _list_images(path: str) -> list:
    if os.path.isfile(path):
        return [path]
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.lower().endswith(".png"))
        if not names:
            raise DataError(f"no PNG files under {path}")
        return [os.path.join(path, n) for n in names]
    raise DataError(f"no such file or directory: {path}")


def _load_images(path: str) -> list:
    from .image_io import load_image

    return [(p, load_image(p)) for p in _list_images(path)]


_CONFIG_KEYS = None


def _train_config_from_args(args) -> "TrainConfig":
    from .training import TrainConfig

    global _CONFIG_KEYS
    if _CONFIG_KEYS is None:
        _CONFIG_KEYS = {f.name: f.type for f in fields(TrainConfig)}

    values = {}
    if args.config:
        if not os.path.isfile(args.config):
            raise UsageError(f"config file not found: {args.config}")
        with open(args.config) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{args.config}:{lineno}: expected key=value")
                key, val = (part.strip() for part in line.split("=", 1))
                if key not in _CONFIG_KEYS:
                    raise UsageError(f"{args.config}:{lineno}: unknown key {key!r}")
                values[key] = val

    def put(key, flag_value, cast):
        if flag_value is not None:
            values[key] = flag_value
        elif key in values:
            values[key] = cast(values[key])

    put("patch_size", args.patch_size, int)
    put("batch_size", args.batch_size, int)
    put("lambda_color", args.lambda_color, float)
    put("lr_init", args.lr, float)
    put("lr_decay_factor", None, float)
    put("lr_decay_every", None, int)
    put("adam_beta1", None, float)
    put("adam_beta2", None, float)
    put("adam_eps", None, float)
    put("epochs", args.epochs, int)
    put("seed", args.seed, int)
    put("steps_per_epoch", args.steps_per_epoch, int)
    put("precision", args.precision, int)
    if args.scales is not None:
        values["scale_set"] = _parse_scales(args.scales)
    elif "scale_set" in values:
        values["scale_set"] = _parse_scales(values["scale_set"])
    try:
        return TrainConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid training configuration: {exc}")


def _parse_scales(text) -> tuple:
    if isinstance(text, tuple):
        return text
    try:
        scales = tuple(int(part) for part in str(text).split(",") if part.strip())
    except ValueError:
        raise UsageError(f"bad scale list: {text!r}")
    if not scales:
        raise UsageError("empty scale list")
    return scales


def _load_checkpoint(path: str):
    from .checkpoint import CheckpointError, load_checkpoint

    if not os.path.isfile(path):
        raise DataError(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path)
    except CheckpointError as exc:
        raise DataError(str(exc))


def cmd_train(args) -> int:
    from .training import train

    cfg = _train_config_from_args(args)
    try:
        images = [img for _, img in _load_images(args.input)]
    except Exception as exc:
        raise DataError(str(exc))
    os.makedirs(args.out, exist_ok=True)

    from .model import ModelConfig

    model_cfg = ModelConfig(
        n_resblocks=args.blocks, n_channels=args.channels, scale_set=cfg.scale_set
    )
    log_path = os.path.join(args.out, "train_log.tsv")
    with open(log_path, "w") as fh:
        fh.write("epoch\tstep\tl_cons\tl_color\tl_total\tlr\n")

        def on_step(epoch, step, report, lr):
            fh.write(
                f"{epoch}\t{step}\t{report.l_cons:.8f}\t{report.l_color:.8f}"
                f"\t{report.l_total:.8f}\t{lr:.3e}\n"
            )
            if step == 0:
                log.info(
                    "epoch %d lr %.2e l_total %.6f", epoch, lr, report.l_total
                )

        try:
            train(
                images,
                cfg,
                model_cfg=model_cfg,
                out_dir=args.out,
                checkpoint_every=args.checkpoint_every,
                on_step=on_step,
            )
        except ValueError as exc:
            raise DataError(str(exc))
    log.info("wrote %s", os.path.join(args.out, "checkpoint_final.ckpt"))
    return 0


def _apply_model(args, direction: str) -> int:
    from .image_io import save_image
    from .model import forward
    from .pairgen import center_crop_divisible

    ckpt = _load_checkpoint(args.checkpoint)
    if args.scale not in ckpt.config.scale_set:
        raise UsageError(
            f"scale {args.scale} not in the checkpoint's scale set {ckpt.config.scale_set}"
        )
    cond = args.scale if direction == "up" else Fraction(1, args.scale)
    os.makedirs(args.out, exist_ok=True)
    for path, img in _load_images(args.input):
        if direction == "down":
            img = center_crop_divisible(img, args.scale)
        out = forward(ckpt.params, img, cond)
        dest = os.path.join(args.out, os.path.basename(path))
        save_image(out, dest)
        log.info("%s -> %s", path, dest)
    return 0


def cmd_sr(args) -> int:
    return _apply_model(args, "up")


def cmd_downsample(args) -> int:
    return _apply_model(args, "down")


def cmd_eval(args) -> int:
    from . import metrics

    sr = {os.path.basename(p): p for p in _list_images(args.sr)}
    gt = {os.path.basename(p): p for p in _list_images(args.gt)}
    if set(sr) != set(gt):
        missing = set(sr) ^ set(gt)
        raise DataError(f"unpaired files between {args.sr} and {args.gt}: {sorted(missing)}")

    from .image_io import load_image

    shave = args.shave if args.shave is not None else (args.scale or 0)
    rows = []
    for name in sorted(sr):
        a = load_image(sr[name])
        b = load_image(gt[name])
        rows.append(
            {
                "image": name,
                "scale": args.scale or "-",
                "method": args.method,
                "psnr": metrics.psnr(a, b, mode=args.mode, shave=shave),
                "ssim": metrics.ssim(a, b, mode=args.mode, shave=shave),
                "mae": metrics.mae(a, b),
            }
        )
    if args.stdout or not args.report:
        metrics.write_report(rows, sys.stdout)
    if args.report:
        metrics.write_report(rows, args.report)
        log.info("wrote %s", args.report)
    return 0


def cmd_baseline(args) -> int:
    from .image_io import save_image
    from .pairgen import center_crop_divisible
    from .resample import bicubic_resize, gaussian_blur, nearest_resize

    if args.sigma <= 0:
        raise UsageError(f"sigma must be positive, got {args.sigma}")
    scale = args.scale if args.direction == "up" else Fraction(1, args.scale)
    os.makedirs(args.out, exist_ok=True)
    for path, img in _load_images(args.input):
        if args.direction == "down":
            img = center_crop_divisible(img, args.scale)
        out = img
        if args.method.startswith("gaussian+"):
            out = gaussian_blur(out, args.sigma)
        if args.method.endswith("bicubic"):
            out = bicubic_resize(out, scale)
        else:
            out = nearest_resize(out, scale)
        dest = os.path.join(args.out, os.path.basename(path))
        save_image(out, dest)
        log.info("%s -> %s", path, dest)
    return 0


def cmd_gen_pairs(args) -> int:
    from .pairgen import export_dataset, generate_llr_lr

    ckpt = _load_checkpoint(args.checkpoint)
    if args.scale not in ckpt.config.scale_set:
        raise UsageError(
            f"scale {args.scale} not in the checkpoint's scale set {ckpt.config.scale_set}"
        )
    images = [img for _, img in _load_images(args.input)]
    pairs = generate_llr_lr(ckpt.params, images, args.scale)
    manifest = export_dataset(pairs, args.out)
    log.info("wrote %s", manifest)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icfsr",
        description="Self-supervised single-image super-resolution toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="self-supervised training on LR images")
    p.add_argument("--input", required=True, help="PNG file or directory of PNGs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scale", type=int, default=None, help="single training scale")
    p.add_argument("--scales", default=None, help="comma list, e.g. 2,4,8")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lambda-color", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--steps-per-epoch", type=int, default=None)
    p.add_argument("--precision", type=int, choices=(32, 64), default=None)
    p.add_argument("--blocks", type=int, default=8)
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    for name, helptext in (
        ("sr", "up-sample images with a trained model"),
        ("downsample", "down-sample images with a trained model"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--input", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--scale", type=int, required=True)
        p.set_defaults(func=cmd_sr if name == "sr" else cmd_downsample)

    p = sub.add_parser("eval", help="PSNR/SSIM/MAE report over paired dirs")
    p.add_argument("--sr", required=True, help="directory of outputs")
    p.add_argument("--gt", required=True, help="directory of ground truth")
    p.add_argument("--mode", choices=("y", "rgb"), default="y")
    p.add_argument("--shave", type=int, default=None, help="border crop (default: scale)")
    p.add_argument("--scale", type=int, default=None)
    p.add_argument("--method", default="model", help="method label for the report")
    p.add_argument("--report", default=None, help="output TSV path")
    p.add_argument("--stdout", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="classical resampling baselines")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--method",
        required=True,
        choices=("bicubic", "nearest", "gaussian+bicubic", "gaussian+nearest"),
    )
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--direction", choices=("up", "down"), default="up")
    p.add_argument("--sigma", type=float, default=0.4)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("gen-pairs", help="export (LLR, LR) pairs from a model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=int, required=True)
    p.set_defaults(func=cmd_gen_pairs)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "scales", None) is None and getattr(args, "scale", None) and args.command == "train":
        args.scales = str(args.scale)
    try:
        return args.func(args)
    except UsageError as exc:
        log.error("error: %s", exc)
        return 2
    except DataError as exc:
        log.error("error: %s", exc)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.error("runtime failure: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
