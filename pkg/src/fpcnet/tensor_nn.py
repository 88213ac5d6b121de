"""Dense tensor layers with explicit forward/backward passes.

Every op works on ``float64`` arrays laid out as ``(C, H, W)`` for a single
tensor or ``(N, C, H, W)`` for a batch. Forward functions are pure; the
layer-level :func:`layer_forward` optionally returns a :class:`LayerState`
that :func:`backward` consumes.

Padding conventions: convolutions pad with zeros, max pooling pads with
``-inf`` and average pooling divides by the number of real (non-padded)
cells in each window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

LAYER_KINDS = (
    "pointwise_conv",
    "conv2d",
    "max_pool",
    "avg_pool",
    "maxout",
    "relu",
    "brelu",
    "concat",
)
PARAMETRIC_KINDS = ("pointwise_conv", "conv2d")


class ShapeError(ValueError):
    """Raised when tensor dimensions are inconsistent with an operation."""


class StateError(RuntimeError):
    """Raised when backward is called without retained forward state."""


def _pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ShapeError(f"expected a pair, got {v!r}")
        return int(v[0]), int(v[1])
    return int(v), int(v)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: tuple[int, int] = (1, 1)
    pad: int = 0
    stride: int = 1
    maxout_group: int = 0

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        object.__setattr__(self, "kernel", _pair(self.kernel))
        if self.kind == "pointwise_conv" and (
            self.kernel != (1, 1) or self.pad != 0 or self.stride != 1
        ):
            raise ValueError("pointwise_conv requires kernel (1, 1), pad 0, stride 1")
        if self.kind == "maxout":
            if self.maxout_group < 1 or self.in_channels % self.maxout_group:
                raise ValueError(
                    f"maxout: in_channels {self.in_channels} not divisible "
                    f"by group {self.maxout_group}"
                )
        if self.stride < 1 or self.pad < 0:
            raise ValueError("stride must be >= 1 and pad >= 0")

    @property
    def parametric(self) -> bool:
        return self.kind in PARAMETRIC_KINDS

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel": list(self.kernel),
            "pad": self.pad,
            "stride": self.stride,
            "maxout_group": self.maxout_group,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(
            kind=d["kind"],
            in_channels=int(d["in_channels"]),
            out_channels=int(d["out_channels"]),
            kernel=tuple(d["kernel"]),
            pad=int(d["pad"]),
            stride=int(d["stride"]),
            maxout_group=int(d["maxout_group"]),
        )


@dataclass
class KernelWeights:
    """Convolution weights ``(out, in, kh, kw)`` and a bias of length ``out``."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 4:
            raise ShapeError(f"weights must be 4-D (out, in, kh, kw), got {self.weights.shape}")
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.bias.shape[0] != self.weights.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} != out_channels {self.weights.shape[0]}"
            )

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel(self) -> tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]

    def copy(self) -> "KernelWeights":
        return KernelWeights(self.weights.copy(), self.bias.copy())


def _batch(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected (C, H, W) or (N, C, H, W), got shape {x.shape}")


def _unbatch(y: np.ndarray, single: bool) -> np.ndarray:
    return y[0] if single else y


def output_size(size: int, kernel: int, pad: int, stride: int) -> int:
    """``floor((size + 2*pad - kernel) / stride) + 1``."""
    span = size + 2 * pad - kernel
    if span < 0:
        raise ShapeError(
            f"kernel {kernel} larger than padded input {size + 2 * pad}"
        )
    return span // stride + 1


def _check_windows_touch_input(size, kernel, pad, stride, n_out, axis):
    # Windows are contiguous, so checking the first and last suffices.
    for o in (0, n_out - 1):
        start = o * stride - pad
        if start >= size or start + kernel <= 0:
            raise ShapeError(
                f"pooling window {o} on the {axis} axis covers only padding"
            )


# ---------------------------------------------------------------------------
# Convolutions


def pointwise_conv_forward(x, w: KernelWeights) -> np.ndarray:
    """1x1 convolution: ``out[o] = bias[o] + sum_c x[c] * w[o, c]``."""
    xb, single = _batch(x)
    if w.kernel != (1, 1):
        raise ShapeError(f"pointwise conv needs a 1x1 kernel, got {w.kernel}")
    n, c, h, wd = xb.shape
    if c != w.in_channels:
        raise ShapeError(f"channel axis: input has {c}, weights expect {w.in_channels}")
    wm = w.weights[:, :, 0, 0]
    y = np.matmul(wm, xb.reshape(n, c, h * wd))
    y += w.bias[None, :, None]
    return _unbatch(y.reshape(n, -1, h, wd), single)


def _pad_zero(xb, pad):
    if pad == 0:
        return xb
    return np.pad(xb, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _windows(xp, kh, kw, stride):
    """Strided view ``(N, C, oh, ow, kh, kw)`` over a padded batch."""
    v = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return v[:, :, ::stride, ::stride]


def conv2d_forward(x, w: KernelWeights, pad: int = 0, stride: int = 1) -> np.ndarray:
    """Zero-padded cross-correlation."""
    xb, single = _batch(x)
    n, c, h, wd = xb.shape
    if c != w.in_channels:
        raise ShapeError(f"channel axis: input has {c}, weights expect {w.in_channels}")
    kh, kw = w.kernel
    oh = output_size(h, kh, pad, stride)
    ow = output_size(wd, kw, pad, stride)
    if kh == kw == 1 and pad == 0 and stride == 1:
        return _unbatch(pointwise_conv_forward(xb, w), single)
    cols = _windows(_pad_zero(xb, pad), kh, kw, stride)[:, :, :oh, :ow]
    y = np.tensordot(cols, w.weights, axes=([1, 4, 5], [1, 2, 3]))
    y = np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    y += w.bias[None, :, None, None]
    return _unbatch(y, single)


def conv2d_backward(x, w: KernelWeights, dy, pad: int = 0, stride: int = 1,
                    need_input_grad: bool = True):
    """Gradients of :func:`conv2d_forward` w.r.t. input, weights and bias."""
    xb, single = _batch(x)
    dyb, _ = _batch(dy)
    n, c, h, wd = xb.shape
    kh, kw = w.kernel
    oh, ow = dyb.shape[2], dyb.shape[3]
    db = dyb.sum(axis=(0, 2, 3))
    if kh == kw == 1 and pad == 0 and stride == 1:
        xf = xb.reshape(n, c, -1)
        gf = dyb.reshape(n, dyb.shape[1], -1)
        dw = np.tensordot(gf, xf, axes=([0, 2], [0, 2]))[:, :, None, None]
        dx = None
        if need_input_grad:
            dx = np.matmul(w.weights[:, :, 0, 0].T, gf).reshape(xb.shape)
            dx = _unbatch(dx, single)
        return dx, KernelWeights(dw, db)
    xp = _pad_zero(xb, pad)
    cols = _windows(xp, kh, kw, stride)[:, :, :oh, :ow]
    dw = np.tensordot(dyb, cols, axes=([0, 2, 3], [0, 2, 3]))
    dx = None
    if need_input_grad:
        dxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                contrib = np.tensordot(w.weights[:, :, i, j], dyb, axes=([0], [1]))
                dxp[:, :, i:i + stride * (oh - 1) + 1:stride,
                    j:j + stride * (ow - 1) + 1:stride] += contrib.transpose(1, 0, 2, 3)
        dx = dxp[:, :, pad:pad + h, pad:pad + wd]
        dx = _unbatch(np.ascontiguousarray(dx), single)
    return dx, KernelWeights(dw, db)


# ---------------------------------------------------------------------------
# Pooling


def _pool_geometry(shape, kernel, pad, stride):
    kh, kw = _pair(kernel)
    h, wd = shape[2], shape[3]
    oh = output_size(h, kh, pad, stride)
    ow = output_size(wd, kw, pad, stride)
    _check_windows_touch_input(h, kh, pad, stride, oh, "height")
    _check_windows_touch_input(wd, kw, pad, stride, ow, "width")
    return kh, kw, oh, ow


@numba.njit(cache=True)
def _max_pool_kernel(x, kh, kw, pad, stride, oh, ow):
    n, c, h, w = x.shape
    out = np.empty((n, c, oh, ow))
    idx = np.empty((n, c, oh, ow), dtype=np.int64)
    for a in range(n):
        for b in range(c):
            for i in range(oh):
                r0 = i * stride - pad
                for j in range(ow):
                    c0 = j * stride - pad
                    best = -np.inf
                    arg = -1
                    for r in range(max(r0, 0), min(r0 + kh, h)):
                        for q in range(max(c0, 0), min(c0 + kw, w)):
                            v = x[a, b, r, q]
                            if v > best or arg < 0:
                                best = v
                                arg = r * w + q
                    out[a, b, i, j] = best
                    idx[a, b, i, j] = arg
    return out, idx


@numba.njit(cache=True)
def _max_pool_back_kernel(idx, dy, h, w):
    n, c, oh, ow = dy.shape
    dx = np.zeros((n, c, h * w))
    for a in range(n):
        for b in range(c):
            for i in range(oh):
                for j in range(ow):
                    dx[a, b, idx[a, b, i, j]] += dy[a, b, i, j]
    return dx.reshape((n, c, h, w))


def max_pool_forward(x, kernel, pad: int = 0, stride: int | None = None,
                     return_indices: bool = False):
    """Max pooling over ``-inf``-padded windows.

    With ``return_indices`` also returns, per output cell, the flat
    ``row * W + col`` position of the winning input cell. Ties resolve to
    the first cell in row-major window order.
    """
    xb, single = _batch(x)
    kh, kw = _pair(kernel)
    stride = kh if stride is None else stride
    kh, kw, oh, ow = _pool_geometry(xb.shape, (kh, kw), pad, stride)
    out, idx = _max_pool_kernel(np.ascontiguousarray(xb), kh, kw, pad, stride, oh, ow)
    out = _unbatch(out, single)
    if return_indices:
        return out, _unbatch(idx, single)
    return out


def max_pool_backward(input_shape, indices, dy) -> np.ndarray:
    """Route ``dy`` to the argmax cell of each window."""
    dyb, single = _batch(dy)
    idx = indices[None] if single else indices
    h, w = input_shape[-2], input_shape[-1]
    dx = _max_pool_back_kernel(np.ascontiguousarray(idx), np.ascontiguousarray(dyb), h, w)
    return _unbatch(dx, single)


@numba.njit(cache=True)
def _pw_max_pool_kernel(x, wt, bias, kh, kw, pad, stride, oh, ow):
    # wt is (in, out); the output channel is innermost so the loops vectorise.
    n, c, h, w = x.shape
    n_out = wt.shape[1]
    out = np.full((n, oh, ow, n_out), -np.inf)
    idx = np.full((n, oh, ow, n_out), -1, dtype=np.int64)
    val = np.empty(n_out)
    for a in range(n):
        for r in range(h):
            i_lo = max(0, -((kh - 1 - r - pad) // stride))
            i_hi = min(oh - 1, (r + pad) // stride)
            for q in range(w):
                j_lo = max(0, -((kw - 1 - q - pad) // stride))
                j_hi = min(ow - 1, (q + pad) // stride)
                if i_lo > i_hi or j_lo > j_hi:
                    continue
                for o in range(n_out):
                    val[o] = 0.0
                for k in range(c):
                    xv = x[a, k, r, q]
                    for o in range(n_out):
                        val[o] += wt[k, o] * xv
                for o in range(n_out):
                    val[o] += bias[o]
                p = r * w + q
                for i in range(i_lo, i_hi + 1):
                    for j in range(j_lo, j_hi + 1):
                        ob = out[a, i, j]
                        ib = idx[a, i, j]
                        for o in range(n_out):
                            if val[o] > ob[o]:
                                ob[o] = val[o]
                                ib[o] = p
    return out.transpose(0, 3, 1, 2).copy(), idx.transpose(0, 3, 1, 2).copy()


@numba.njit(cache=True)
def _pw_max_pool_back_kernel(xf, wm, idx, dy, need_dx):
    n, c, _ = xf.shape
    n_out, oh, ow = dy.shape[1], dy.shape[2], dy.shape[3]
    dw = np.zeros((n_out, c))
    db = np.zeros(n_out)
    dx = np.zeros(xf.shape) if need_dx else np.zeros((1, 1, 1))
    for a in range(n):
        for o in range(n_out):
            for i in range(oh):
                for j in range(ow):
                    g = dy[a, o, i, j]
                    p = idx[a, o, i, j]
                    db[o] += g
                    for k in range(c):
                        dw[o, k] += g * xf[a, k, p]
                        if need_dx:
                            dx[a, k, p] += g * wm[o, k]
    return dx, dw, db


def pointwise_max_pool_forward(x, w: KernelWeights, kernel, pad: int = 0,
                               stride: int | None = None):
    """Fused ``max_pool(pointwise_conv(x))`` that never stores the conv output.

    Returns ``(pooled, indices)`` with indices in :func:`max_pool_forward`
    form. Agrees with the unfused pair up to floating-point summation order.
    """
    xb, single = _batch(x)
    if w.kernel != (1, 1):
        raise ShapeError(f"pointwise conv needs a 1x1 kernel, got {w.kernel}")
    if xb.shape[1] != w.in_channels:
        raise ShapeError(f"channel axis: input has {xb.shape[1]}, weights expect {w.in_channels}")
    kh, kw = _pair(kernel)
    stride = kh if stride is None else stride
    kh, kw, oh, ow = _pool_geometry(xb.shape, (kh, kw), pad, stride)
    out, idx = _pw_max_pool_kernel(np.ascontiguousarray(xb), np.ascontiguousarray(w.weights[:, :, 0, 0].T),
                                   w.bias, kh, kw, pad, stride, oh, ow)
    return _unbatch(out, single), _unbatch(idx, single)


def pointwise_max_pool_backward(x, w: KernelWeights, indices, dy, need_input_grad: bool = True):
    """Gradients of :func:`pointwise_max_pool_forward`; returns ``(dx, dweights)``."""
    xb, single = _batch(x)
    dyb, _ = _batch(dy)
    idx = indices[None] if single else indices
    n, c, h, wd = xb.shape
    dx, dw, db = _pw_max_pool_back_kernel(
        np.ascontiguousarray(xb).reshape(n, c, h * wd), np.ascontiguousarray(w.weights[:, :, 0, 0]),
        np.ascontiguousarray(idx), np.ascontiguousarray(dyb), need_input_grad)
    grads = KernelWeights(dw[:, :, None, None], db)
    if not need_input_grad:
        return None, grads
    return _unbatch(dx.reshape(xb.shape), single), grads


def _window_counts(h, wd, kh, kw, pad, stride, oh, ow):
    rows = np.array([min(o * stride - pad + kh, h) - max(o * stride - pad, 0) for o in range(oh)])
    cols = np.array([min(o * stride - pad + kw, wd) - max(o * stride - pad, 0) for o in range(ow)])
    return np.outer(rows, cols).astype(np.float64)


def avg_pool_forward(x, kernel, pad: int = 0, stride: int | None = None) -> np.ndarray:
    """Mean over each window, excluding padded cells from the divisor."""
    xb, single = _batch(x)
    kh, kw = _pair(kernel)
    stride = kh if stride is None else stride
    kh, kw, oh, ow = _pool_geometry(xb.shape, (kh, kw), pad, stride)
    n, c, h, wd = xb.shape
    xp = _pad_zero(xb, pad)
    acc = np.zeros((n, c, oh, ow))
    for i in range(kh):
        for j in range(kw):
            acc += xp[:, :, i:i + stride * (oh - 1) + 1:stride,
                      j:j + stride * (ow - 1) + 1:stride]
    acc /= _window_counts(h, wd, kh, kw, pad, stride, oh, ow)
    return _unbatch(acc, single)


def avg_pool_backward(input_shape, dy, kernel, pad: int = 0,
                      stride: int | None = None) -> np.ndarray:
    kh, kw = _pair(kernel)
    stride = kh if stride is None else stride
    dyb, single = _batch(dy)
    n, c, h, wd = (tuple(input_shape) if len(input_shape) == 4 else (1,) + tuple(input_shape))
    oh, ow = dyb.shape[2], dyb.shape[3]
    g = dyb / _window_counts(h, wd, kh, kw, pad, stride, oh, ow)
    dxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + stride * (oh - 1) + 1:stride,
                j:j + stride * (ow - 1) + 1:stride] += g
    dx = np.ascontiguousarray(dxp[:, :, pad:pad + h, pad:pad + wd])
    return _unbatch(dx, single)


# ---------------------------------------------------------------------------
# Channel ops and activations


@numba.njit(cache=True)
def _maxout_kernel(x, group):
    n, c, h, w = x.shape
    k = c // group
    out = np.empty((n, k, h, w))
    idx = np.zeros((n, k, h, w), dtype=np.int64)
    for a in range(n):
        for g in range(k):
            out[a, g] = x[a, g * group]
            for m in range(1, group):
                src = x[a, g * group + m]
                ob = out[a, g]
                ib = idx[a, g]
                for r in range(h):
                    for q in range(w):
                        if src[r, q] > ob[r, q]:
                            ob[r, q] = src[r, q]
                            ib[r, q] = m
    return out, idx


@numba.njit(cache=True)
def _maxout_back_kernel(idx, dy, group):
    n, k, h, w = dy.shape
    dx = np.zeros((n, k * group, h, w))
    for a in range(n):
        for g in range(k):
            for r in range(h):
                for q in range(w):
                    dx[a, g * group + idx[a, g, r, q], r, q] = dy[a, g, r, q]
    return dx


def maxout_forward(x, group: int, return_indices: bool = False):
    """Max over consecutive groups of ``group`` channels (first max wins ties)."""
    xb, single = _batch(x)
    c = xb.shape[1]
    if group < 1 or c % group:
        raise ShapeError(f"channel axis: {c} channels not divisible by maxout group {group}")
    out, idx = _maxout_kernel(np.ascontiguousarray(xb), group)
    out = _unbatch(out, single)
    if return_indices:
        return out, _unbatch(idx, single)
    return out


def maxout_backward(indices, dy, group: int) -> np.ndarray:
    dyb, single = _batch(dy)
    idx = indices[None] if single else indices
    dx = _maxout_back_kernel(np.ascontiguousarray(idx), np.ascontiguousarray(dyb), group)
    return _unbatch(dx, single)


def relu_forward(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(x, dy) -> np.ndarray:
    return np.where(np.asarray(x) > 0.0, dy, 0.0)


def brelu_forward(x) -> np.ndarray:
    """Bounded ReLU, clamps to ``[0, 1]``."""
    return np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)


def brelu_backward(x, dy) -> np.ndarray:
    x = np.asarray(x)
    return np.where((x > 0.0) & (x < 1.0), dy, 0.0)


def concat_channels(xs: Sequence[np.ndarray]) -> np.ndarray:
    if not xs:
        raise ShapeError("concat of zero tensors")
    batches = [_batch(x) for x in xs]
    singles = {s for _, s in batches}
    if len(singles) != 1:
        raise ShapeError("concat inputs mix batched and unbatched tensors")
    ref = batches[0][0].shape
    for b, _ in batches[1:]:
        if b.shape[0] != ref[0]:
            raise ShapeError(f"batch axis: {b.shape[0]} != {ref[0]}")
        if b.shape[2:] != ref[2:]:
            raise ShapeError(f"spatial axes: {b.shape[2:]} != {ref[2:]}")
    out = np.concatenate([b for b, _ in batches], axis=1)
    return _unbatch(out, singles.pop())


# ---------------------------------------------------------------------------
# Layer-level dispatch


@dataclass
class LayerState:
    """What :func:`backward` needs from a forward call."""

    layer: LayerSpec
    inputs: list
    extra: dict = field(default_factory=dict)


def layer_output_shape(layer: LayerSpec, in_shapes: Sequence[tuple[int, int, int]]):
    """Output ``(C, H, W)`` of ``layer`` for the given input shape(s)."""
    if layer.kind == "concat":
        hw = {s[1:] for s in in_shapes}
        if len(hw) != 1:
            raise ShapeError(f"concat inputs have different spatial sizes {sorted(hw)}")
        return (sum(s[0] for s in in_shapes),) + in_shapes[0][1:]
    (c, h, w), = in_shapes
    if layer.in_channels and c != layer.in_channels and layer.kind in (
            "pointwise_conv", "conv2d", "maxout"):
        raise ShapeError(f"{layer.kind}: channel axis {c} != declared {layer.in_channels}")
    kh, kw = layer.kernel
    if layer.kind in ("pointwise_conv", "conv2d"):
        return (layer.out_channels, output_size(h, kh, layer.pad, layer.stride),
                output_size(w, kw, layer.pad, layer.stride))
    if layer.kind in ("max_pool", "avg_pool"):
        _, _, oh, ow = _pool_geometry((1, c, h, w), (kh, kw), layer.pad, layer.stride)
        return (c, oh, ow)
    if layer.kind == "maxout":
        return (c // layer.maxout_group, h, w)
    return (c, h, w)


def layer_forward(layer: LayerSpec, x, weights: KernelWeights | None = None,
                  keep_state: bool = False):
    """Run one layer. Returns ``(output, state)``; ``state`` is None unless kept.

    ``x`` is a list of tensors for ``concat`` and a single tensor otherwise.
    """
    k = layer.kind
    extra = {}
    if k == "pointwise_conv":
        y = pointwise_conv_forward(x, weights)
    elif k == "conv2d":
        y = conv2d_forward(x, weights, layer.pad, layer.stride)
    elif k == "max_pool":
        y, idx = max_pool_forward(x, layer.kernel, layer.pad, layer.stride, return_indices=True)
        extra["indices"] = idx
    elif k == "avg_pool":
        y = avg_pool_forward(x, layer.kernel, layer.pad, layer.stride)
    elif k == "maxout":
        y, idx = maxout_forward(x, layer.maxout_group, return_indices=True)
        extra["indices"] = idx
    elif k == "relu":
        y = relu_forward(x)
    elif k == "brelu":
        y = brelu_forward(x)
    elif k == "concat":
        y = concat_channels(x)
        extra["splits"] = [np.shape(t)[-3] for t in x]
    else:  # pragma: no cover - LayerSpec validates kind
        raise ValueError(k)
    if not keep_state:
        return y, None
    if k in ("max_pool", "avg_pool", "maxout", "concat"):
        # Only shapes are needed for these kinds.
        inputs = [np.shape(t) for t in x] if k == "concat" else [np.shape(x)]
    else:
        inputs = [x]
    return y, LayerState(layer, inputs, extra)


def backward(layer: LayerSpec, state: LayerState | None, dy, weights: KernelWeights | None = None,
             need_input_grad: bool = True):
    """Backpropagate ``dy`` through one layer.

    Returns ``(dx, dweights)``. ``dx`` is a list for ``concat``; ``dweights``
    is a :class:`KernelWeights` of gradients for parametric layers, else None.
    """
    if state is None:
        raise StateError(f"backward on {layer.kind} before a state-keeping forward")
    if state.layer != layer:
        raise StateError("state was produced by a different layer")
    k = layer.kind
    if k == "pointwise_conv" or k == "conv2d":
        if weights is None:
            raise StateError(f"{k} backward needs the forward weights")
        return conv2d_backward(state.inputs[0], weights, dy, layer.pad, layer.stride,
                               need_input_grad=need_input_grad)
    if k == "max_pool":
        return max_pool_backward(state.inputs[0], state.extra["indices"], dy), None
    if k == "avg_pool":
        return avg_pool_backward(state.inputs[0], dy, layer.kernel, layer.pad,
                                 layer.stride), None
    if k == "maxout":
        return maxout_backward(state.extra["indices"], dy, layer.maxout_group), None
    if k == "relu":
        return relu_backward(state.inputs[0], dy), None
    if k == "brelu":
        return brelu_backward(state.inputs[0], dy), None
    if k == "concat":
        bounds = np.cumsum([0] + state.extra["splits"])
        return [dy[..., bounds[i]:bounds[i + 1], :, :] for i in range(len(bounds) - 1)], None
    raise ValueError(k)  # pragma: no cover
