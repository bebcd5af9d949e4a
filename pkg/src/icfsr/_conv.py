"""Raw 3x3 same-padding convolution kernels on NHWC numpy arrays.

torch's CPU kernels are used as the compute primitive; tensors are bridged
zero-copy by viewing an NHWC array as a channels-last NCHW tensor.  The
input gradient is evaluated as a forward convolution with transposed,
spatially flipped weights (the exact adjoint for stride 1, padding 1),
which is substantially faster here than the dedicated backward kernel.
No torch autograd state is involved.
"""

from __future__ import annotations

import os

import numpy as np
import torch

torch.set_grad_enabled(False)

_threads = os.environ.get("ICF_THREADS")
if _threads:
    torch.set_num_threads(max(1, int(_threads)))


def _to_cl(x: np.ndarray) -> torch.Tensor:
    # (N, H, W, C) viewed as channels-last (N, C, H, W); no copy
    if not x.flags["C_CONTIGUOUS"]:
        x = np.ascontiguousarray(x)
    return torch.from_numpy(x).permute(0, 3, 1, 2)


def _to_nhwc(t: torch.Tensor) -> np.ndarray:
    p = t.permute(0, 2, 3, 1)
    if not p.is_contiguous():
        p = p.contiguous()
    return p.numpy()


def _weight_cl(w: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(w).contiguous(memory_format=torch.channels_last)


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, relu: bool = False) -> np.ndarray:
    """y[n, i, j, o] = b[o] + sum_{c,di,dj} x[n, i+di-1, j+dj-1, c] * w[o, c, di, dj]
    with zero padding outside the image; optionally rectified in place."""
    y = torch.nn.functional.conv2d(
        _to_cl(x), _weight_cl(w), torch.from_numpy(b), padding=1
    )
    if relu:
        y.clamp_(min=0)  # fresh buffer, safe to rectify in place
    return _to_nhwc(y)


def conv2d_input_grad(w: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Adjoint of conv2d with respect to its input."""
    wt = np.ascontiguousarray(w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    gx = torch.nn.functional.conv2d(_to_cl(gy), _weight_cl(wt), padding=1)
    return _to_nhwc(gx)


def conv2d_weight_grad(x: np.ndarray, w_shape: tuple, gy: np.ndarray) -> np.ndarray:
    """Adjoint of conv2d with respect to its weights, shape (Cout, Cin, 3, 3)."""
    gw = torch.nn.grad.conv2d_weight(_to_cl(x), w_shape, _to_cl(gy), padding=1)
    return np.ascontiguousarray(gw.contiguous().numpy())
