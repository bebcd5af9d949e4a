"""Minimal reverse-mode differentiation over NHWC numpy arrays.

A ``Var`` wraps a value and remembers how it was produced; ``backward`` on a
scalar Var accumulates gradients into every reachable Var that requires
them.  Only the operator set needed by the scale-conditional network is
provided.  Ops skip recording entirely when no input requires gradients, so
the same functions double as the inference path.

Batched image values are (N, H, W, C); scalars are 0-d arrays.
"""

from __future__ import annotations

import numpy as np

from . import _conv

__all__ = [
    "Var",
    "constant",
    "parameter",
    "stop_gradient",
    "conv2d",
    "relu",
    "add",
    "mul_scalar",
    "add_scalar_vars",
    "pixel_shuffle_nhwc",
    "pixel_unshuffle_nhwc",
    "resize_separable",
    "avg_pool_nhwc",
    "l1_mean",
]


class Var:
    """Node of the computation record."""

    __slots__ = ("value", "parents", "requires_grad", "grad")

    def __init__(self, value, parents=(), requires_grad=False):
        self.value = value
        self.parents = parents  # tuple of (Var, vjp callable)
        self.requires_grad = requires_grad
        self.grad = None

    def backward(self, seed=None) -> None:
        """Accumulate d(self)/d(leaf) into .grad of every grad-requiring leaf.

        ``seed`` defaults to 1.0 and must match self.value's shape.
        """
        if seed is None:
            seed = np.ones_like(self.value)
        order = _toposort(self)
        grads = {id(self): np.asarray(seed, dtype=self.value.dtype)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node.parents:  # leaf: accumulate across backward calls
                node.grad = g if node.grad is None else node.grad + g
            for parent, vjp in node.parents:
                if not parent.requires_grad:
                    continue
                pg = vjp(g)
                pid = id(parent)
                if pid in grads:
                    grads[pid] = grads[pid] + pg
                else:
                    grads[pid] = pg


def _toposort(root: Var):
    """Reverse topological order, iterative to survive deep graphs."""
    order, state = [], {}
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if state.get(id(node)):
            continue
        state[id(node)] = True
        stack.append((node, True))
        for parent, _ in node.parents:
            if parent.requires_grad and not state.get(id(parent)):
                stack.append((parent, False))
    return order[::-1]


def constant(value) -> Var:
    return Var(np.asarray(value))


def parameter(value) -> Var:
    return Var(np.asarray(value), requires_grad=True)


def stop_gradient(x: Var) -> Var:
    """Pass the value through and sever all gradient flow."""
    return Var(x.value)


def _track(value, pairs):
    pairs = tuple((p, f) for p, f in pairs if p.requires_grad)
    if not pairs:
        return Var(value)
    return Var(value, parents=pairs, requires_grad=True)


def conv2d(x: Var, w: Var, b: Var, fuse_relu: bool = False) -> Var:
    """3x3 same-padding convolution, optionally with a fused ReLU.

    With ``fuse_relu`` the recorded node is relu(conv(x)); its adjoints mask
    the incoming gradient by the output sign before the conv adjoints.
    """
    xv, wv = x.value, w.value
    y = _conv.conv2d(xv, wv, b.value, relu=fuse_relu)
    if fuse_relu:
        cell = {}

        def masked(g):
            # the three adjoints of one backward share the same incoming g
            if cell.get("src") is not g:
                cell["src"] = g
                cell["val"] = g * (y > 0)
            return cell["val"]

        return _track(
            y,
            (
                (x, lambda g: _conv.conv2d_input_grad(wv, masked(g))),
                (w, lambda g: _conv.conv2d_weight_grad(xv, wv.shape, masked(g))),
                (b, lambda g: masked(g).sum(axis=(0, 1, 2))),
            ),
        )
    return _track(
        y,
        (
            (x, lambda g: _conv.conv2d_input_grad(wv, g)),
            (w, lambda g: _conv.conv2d_weight_grad(xv, wv.shape, g)),
            (b, lambda g: g.sum(axis=(0, 1, 2))),
        ),
    )


def relu(x: Var) -> Var:
    y = np.maximum(x.value, 0)
    return _track(y, ((x, lambda g: g * (y > 0)),))


def add(a: Var, b: Var) -> Var:
    return _track(a.value + b.value, ((a, lambda g: g), (b, lambda g: g)))


def mul_scalar(x: Var, c: float) -> Var:
    return _track(x.value * c, ((x, lambda g: g * c),))


def add_scalar_vars(terms) -> Var:
    """Sum of scalar Vars."""
    terms = list(terms)
    total = terms[0].value
    for t in terms[1:]:
        total = total + t.value
    return _track(total, tuple((t, lambda g: g) for t in terms))


def _shuffle_fwd(v: np.ndarray, s: int) -> np.ndarray:
    n, h, w, c = v.shape
    cout = c // (s * s)
    v = v.reshape(n, h, w, cout, s, s)
    v = v.transpose(0, 1, 4, 2, 5, 3)  # (n, h, s, w, s, cout)
    return np.ascontiguousarray(v.reshape(n, h * s, w * s, cout))


def _unshuffle_fwd(v: np.ndarray, s: int) -> np.ndarray:
    n, h, w, c = v.shape
    v = v.reshape(n, h // s, s, w // s, s, c)
    v = v.transpose(0, 1, 3, 5, 2, 4)  # (n, h/s, w/s, c, s, s)
    return np.ascontiguousarray(v.reshape(n, h // s, w // s, c * s * s))


def pixel_shuffle_nhwc(x: Var, s: int) -> Var:
    """Channel blocks of size s*s become s x s spatial offsets, row-major:
    out[n, s*y+dy, s*x+dx, c] = in[n, y, x, c*s*s + dy*s + dx]."""
    if s == 1:
        return x
    if x.value.shape[3] % (s * s):
        raise ValueError(
            f"channel count {x.value.shape[3]} not divisible by {s}^2"
        )
    return _track(_shuffle_fwd(x.value, s), ((x, lambda g: _unshuffle_fwd(g, s)),))


def pixel_unshuffle_nhwc(x: Var, s: int) -> Var:
    """Exact inverse index map of pixel_shuffle_nhwc."""
    if s == 1:
        return x
    n, h, w, c = x.value.shape
    if h % s or w % s:
        raise ValueError(f"dims {h}x{w} not divisible by {s}")
    return _track(_unshuffle_fwd(x.value, s), ((x, lambda g: _shuffle_fwd(g, s)),))


def resize_separable(x: Var, rmat: np.ndarray, cmat: np.ndarray) -> Var:
    """Fixed linear resize y[n] = rmat @ x[n] @ cmat.T per channel."""

    def apply(v, rm, cm):
        tmp = np.tensordot(rm, v, axes=(1, 1))  # (H', N, W, C)
        out = np.tensordot(cm, tmp, axes=(1, 2))  # (W', H', N, C)
        return np.ascontiguousarray(out.transpose(2, 1, 0, 3), dtype=v.dtype)

    rm = rmat.astype(x.value.dtype)
    cm = cmat.astype(x.value.dtype)
    y = apply(x.value, rm, cm)
    return _track(y, ((x, lambda g: apply(g, rm.T, cm.T)),))


def avg_pool_nhwc(x: Var, window: int) -> Var:
    n, h, w, c = x.value.shape
    if h % window or w % window:
        raise ValueError(f"dims {h}x{w} not divisible by window {window}")
    blocks = x.value.reshape(n, h // window, window, w // window, window, c)
    y = blocks.mean(axis=(2, 4))

    def vjp(g):
        g = g[:, :, None, :, None, :] / (window * window)
        return np.broadcast_to(
            g, (n, h // window, window, w // window, window, c)
        ).reshape(n, h, w, c)

    return _track(np.ascontiguousarray(y), ((x, vjp),))


def l1_mean(a: Var, b: Var) -> Var:
    """Mean absolute difference; the kink at zero takes subgradient 0."""
    diff = a.value - b.value
    value = np.abs(diff).mean(dtype=diff.dtype)
    scale = 1.0 / diff.size
    cell = {}

    def signed(g):
        if "s" not in cell:  # sign pattern is a pure function of the values
            cell["s"] = np.sign(diff) * scale
        return g * cell["s"]

    return _track(
        np.asarray(value),
        ((a, lambda g: signed(g)), (b, lambda g: -signed(g))),
    )
