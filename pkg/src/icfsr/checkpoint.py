"""Single-file checkpoint container.

Layout: one ASCII header line ``ICFSR-CKPT v1 <manifest_bytes>\\n``, the
UTF-8 JSON manifest, then raw little-endian float blobs concatenated in
manifest order.  The manifest records the model configuration, training
progress, generator state, a digest of the training configuration, and a
table of tensor entries (name, shape, dtype, offset, nbytes) covering the
parameters and both optimizer moment sets.  Serialization is canonical,
so save -> load -> save is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .model import ModelConfig, ModelParameters

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "train_config_digest",
]

_MAGIC = "ICFSR-CKPT v1"
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


class CheckpointError(Exception):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParameters
    opt: "AdamState"
    epoch: int
    rng_state: dict
    train_digest: str


def train_config_digest(cfg) -> str:
    payload = json.dumps(asdict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def _dtype_tag(arr: np.ndarray) -> str:
    if arr.dtype == np.float32:
        return "<f4"
    if arr.dtype == np.float64:
        return "<f8"
    raise CheckpointError(f"unsupported tensor dtype {arr.dtype}")


def _tensor_table(ckpt: Checkpoint):
    """Deterministic (name, array) sequence: parameters, then both moments."""
    for name, arr in ckpt.params.tensors.items():
        yield "param." + name, arr
    for name, arr in ckpt.opt.m.items():
        yield "adam.m." + name, arr
    for name, arr in ckpt.opt.v.items():
        yield "adam.v." + name, arr


def save_checkpoint(ckpt: Checkpoint, path: str) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in _tensor_table(ckpt):
        tag = _dtype_tag(arr)
        blob = np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": tag,
                "offset": offset,
                "nbytes": len(blob),
            }
        )
        blobs.append(blob)
        offset += len(blob)
    manifest = {
        "format": 1,
        "model": {
            "n_resblocks": ckpt.config.n_resblocks,
            "n_channels": ckpt.config.n_channels,
            "scale_set": list(ckpt.config.scale_set),
            "conv_kernel": ckpt.config.conv_kernel,
            "residual_scaling": ckpt.config.residual_scaling,
        },
        "epoch": ckpt.epoch,
        "adam_step": ckpt.opt.step,
        "rng": ckpt.rng_state,
        "train_digest": ckpt.train_digest,
        "tensors": entries,
    }
    body = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(f"{_MAGIC} {len(body)}\n".encode("ascii"))
        fh.write(body)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str) -> Checkpoint:
    from .training import AdamState

    with open(path, "rb") as fh:
        header = fh.readline()
        try:
            parts = header.decode("ascii").split()
            size = int(parts[2])
        except (UnicodeDecodeError, ValueError, IndexError):
            raise CheckpointError(f"not a checkpoint file: {path}")
        if " ".join(parts[:2]) != _MAGIC:
            raise CheckpointError(
                f"unsupported checkpoint version (expected '{_MAGIC}'): {path}"
            )
        body = fh.read(size)
        if len(body) != size:
            raise CheckpointError(f"truncated checkpoint manifest: {path}")
        try:
            manifest = json.loads(body.decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise CheckpointError(f"corrupt checkpoint manifest: {path}")
        if manifest.get("format") != 1:
            raise CheckpointError(f"unsupported checkpoint format: {path}")
        data = fh.read()

    expected = sum(e["nbytes"] for e in manifest["tensors"])
    if len(data) != expected:
        raise CheckpointError(
            f"checkpoint blob section has {len(data)} bytes, manifest expects {expected}"
        )

    m = manifest["model"]
    config = ModelConfig(
        n_resblocks=m["n_resblocks"],
        n_channels=m["n_channels"],
        scale_set=tuple(m["scale_set"]),
        conv_kernel=m["conv_kernel"],
        residual_scaling=m["residual_scaling"],
    )
    tensors, adam_m, adam_v = {}, {}, {}
    for entry in manifest["tensors"]:
        tag = entry["dtype"]
        if tag not in _DTYPES:
            raise CheckpointError(f"unknown tensor dtype {tag} in {path}")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        if count * _DTYPES[tag].itemsize != entry["nbytes"]:
            raise CheckpointError(
                f"shape {shape} inconsistent with blob length for {entry['name']}"
            )
        arr = np.frombuffer(
            data, dtype=_DTYPES[tag], count=count, offset=entry["offset"]
        ).reshape(shape)
        arr = np.array(arr)  # writable copy in native order
        name = entry["name"]
        if name.startswith("param."):
            tensors[name[len("param.") :]] = arr
        elif name.startswith("adam.m."):
            adam_m[name[len("adam.m.") :]] = arr
        elif name.startswith("adam.v."):
            adam_v[name[len("adam.v.") :]] = arr
        else:
            raise CheckpointError(f"unknown tensor section for {name}")

    params = ModelParameters(config, tensors)
    opt = AdamState(adam_m, adam_v, manifest["adam_step"])
    return Checkpoint(
        config, params, opt, manifest["epoch"], manifest["rng"], manifest["train_digest"]
    )
