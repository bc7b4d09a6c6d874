"""Dense feature-map tensors and the neural operators used by LytNetV2.

A tensor is a C-contiguous ``float32`` numpy array of shape
``(channels, height, width)``; flat vectors (pooled features, logits) are
rank-1 arrays. Every convolution uses "same" padding (``k // 2`` per side),
so a stride-``s`` operator maps a spatial size ``n`` to ``ceil(n / s)``.

Accumulation happens kernel tap by kernel tap in a fixed order, so repeated
calls on the same inputs give bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ValidationError

DTYPE = np.float32


def as_tensor(data, *, name="tensor") -> np.ndarray:
    """Coerce ``data`` to a contiguous float32 (C, H, W) array and validate it."""
    arr = np.ascontiguousarray(data, dtype=DTYPE)
    if arr.ndim != 3:
        raise ValidationError(f"{name}: expected rank-3 (C, H, W), got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ValidationError(f"{name}: every dimension must be >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: contains non-finite values")
    return arr


def _vector(values, length, name):
    if values is None:
        return None
    arr = np.ascontiguousarray(values, dtype=DTYPE).reshape(-1)
    if arr.shape[0] != length:
        raise ConfigurationError(f"{name}: expected {length} values, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: contains non-finite values")
    return arr


@dataclass(frozen=True)
class ConvParams:
    """Weights and geometry of one convolution.

    ``weights`` has shape ``(out, in, k_h, k_w)`` for a standard convolution
    and ``(out, 1, k_h, k_w)`` for a depthwise one. ``scale``/``shift`` hold
    a folded normalization applied after the bias:
    ``y = (conv(x) + bias) * scale + shift``.
    """

    weights: np.ndarray
    stride: int = 1
    bias: Optional[np.ndarray] = None
    scale: Optional[np.ndarray] = None
    shift: Optional[np.ndarray] = None
    depthwise: bool = False

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=DTYPE)
        if w.ndim != 4:
            raise ConfigurationError(f"conv weights must be 4-D, got shape {w.shape}")
        if self.stride not in (1, 2):
            raise ConfigurationError(f"stride must be 1 or 2, got {self.stride}")
        kh, kw = w.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise ConfigurationError(f"'same' padding needs odd kernels, got {kh}x{kw}")
        if self.depthwise and w.shape[1] != 1:
            raise ConfigurationError(
                f"depthwise weights must have shape (C, 1, k, k), got {w.shape}"
            )
        if not np.all(np.isfinite(w)):
            raise ValidationError("conv weights contain non-finite values")
        out = w.shape[0]
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", _vector(self.bias, out, "bias"))
        object.__setattr__(self, "scale", _vector(self.scale, out, "scale"))
        object.__setattr__(self, "shift", _vector(self.shift, out, "shift"))

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[0] if self.depthwise else self.weights.shape[1]

    @property
    def kernel(self) -> tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]

    @property
    def padding(self) -> tuple[int, int]:
        kh, kw = self.kernel
        return kh // 2, kw // 2

    def output_shape(self, input_shape) -> tuple[int, int, int]:
        _, h, w = input_shape
        return (
            self.out_channels,
            math.ceil(h / self.stride),
            math.ceil(w / self.stride),
        )


def _check_input(x, params: ConvParams) -> np.ndarray:
    x = as_tensor(x, name="conv input")
    if x.shape[0] != params.in_channels:
        raise ConfigurationError(
            f"input has {x.shape[0]} channels, conv expects {params.in_channels}"
        )
    return x


def _finish(acc: np.ndarray, params: ConvParams) -> np.ndarray:
    if params.bias is not None:
        acc += params.bias[:, None, None]
    if params.scale is not None:
        acc *= params.scale[:, None, None]
    if params.shift is not None:
        acc += params.shift[:, None, None]
    return acc


def _taps(x: np.ndarray, params: ConvParams):
    """Yield ``(ky, kx, window)`` with each window shaped (C, H_out, W_out)."""
    kh, kw = params.kernel
    ph, pw = params.padding
    s = params.stride
    _, ho, wo = params.output_shape(x.shape)
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    for ky in range(kh):
        for kx in range(kw):
            yield ky, kx, xp[:, ky : ky + s * (ho - 1) + 1 : s, kx : kx + s * (wo - 1) + 1 : s]


def conv2d(x, params: ConvParams) -> np.ndarray:
    """Standard (dense) 2-D convolution."""
    if params.depthwise:
        return depthwise_conv2d(x, params)
    x = _check_input(x, params)
    co, ho, wo = params.output_shape(x.shape)
    ci = x.shape[0]
    acc = np.zeros((co, ho * wo), dtype=DTYPE)
    for ky, kx, window in _taps(x, params):
        acc += params.weights[:, :, ky, kx] @ window.reshape(ci, ho * wo)
    return _finish(acc.reshape(co, ho, wo), params)


def depthwise_conv2d(x, params: ConvParams) -> np.ndarray:
    """Per-channel convolution: output channel ``i`` sees only input channel ``i``."""
    if not params.depthwise:
        raise ConfigurationError("depthwise_conv2d needs depthwise ConvParams")
    x = _check_input(x, params)
    co, ho, wo = params.output_shape(x.shape)
    acc = np.zeros((co, ho, wo), dtype=DTYPE)
    for ky, kx, window in _taps(x, params):
        acc += params.weights[:, 0, ky, kx][:, None, None] * window
    return _finish(acc, params)


def naive_conv2d(x, params: ConvParams) -> np.ndarray:
    """Textbook loop convolution, used as a reference oracle.

    Handles both standard and depthwise parameters. Accumulates in Python
    floats in (channel, ky, kx) order; only practical for small inputs.
    """
    x = _check_input(x, params)
    co, ho, wo = params.output_shape(x.shape)
    ci, h, w = x.shape
    kh, kw = params.kernel
    ph, pw = params.padding
    s = params.stride
    wts = params.weights.tolist()
    xs = x.tolist()
    out = np.zeros((co, ho, wo), dtype=np.float64)
    for o in range(co):
        in_range = [o] if params.depthwise else range(ci)
        for oy in range(ho):
            for ox in range(wo):
                acc = 0.0
                for c in in_range:
                    wc = wts[o][0 if params.depthwise else c]
                    for ky in range(kh):
                        iy = oy * s + ky - ph
                        if iy < 0 or iy >= h:
                            continue
                        for kx in range(kw):
                            ix = ox * s + kx - pw
                            if ix < 0 or ix >= w:
                                continue
                            acc += wc[ky][kx] * xs[c][iy][ix]
                if params.bias is not None:
                    acc += float(params.bias[o])
                if params.scale is not None:
                    acc *= float(params.scale[o])
                if params.shift is not None:
                    acc += float(params.shift[o])
                out[o, oy, ox] = acc
    return out.astype(DTYPE)


def maxpool2x2(x) -> np.ndarray:
    """2x2 max pooling with stride 2."""
    x = as_tensor(x, name="maxpool input")
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValidationError(f"maxpool2x2 needs even height and width, got {h}x{w}")
    return np.ascontiguousarray(x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4)))


def global_avgpool(x) -> np.ndarray:
    """Spatial mean per channel; returns shape (C, 1, 1)."""
    x = as_tensor(x, name="avgpool input")
    c = x.shape[0]
    return x.reshape(c, -1).mean(axis=1, dtype=np.float64).astype(DTYPE).reshape(c, 1, 1)


def relu(x):
    return np.maximum(x, 0).astype(DTYPE, copy=False)


def relu6(x):
    return np.clip(x, 0, 6).astype(DTYPE, copy=False)


def hard_sigmoid(x):
    return (relu6(np.asarray(x, dtype=DTYPE) + DTYPE(3)) / DTYPE(6)).astype(DTYPE, copy=False)


def hard_swish(x):
    x = np.asarray(x, dtype=DTYPE)
    return (x * hard_sigmoid(x)).astype(DTYPE, copy=False)


ACTIVATIONS = {"RE": relu, "HS": hard_swish, None: lambda x: x}


def fully_connected(x, weights, bias=None) -> np.ndarray:
    """Affine map ``weights @ x + bias``; ``weights`` is (out, in)."""
    x = np.asarray(x, dtype=DTYPE).reshape(-1)
    weights = np.asarray(weights, dtype=DTYPE)
    if weights.ndim != 2 or weights.shape[1] != x.shape[0]:
        raise ConfigurationError(
            f"fully_connected: weights {weights.shape} incompatible with input length {x.shape[0]}"
        )
    y = weights @ x
    if bias is not None:
        bias = np.asarray(bias, dtype=DTYPE).reshape(-1)
        if bias.shape[0] != weights.shape[0]:
            raise ConfigurationError(
                f"fully_connected: bias length {bias.shape[0]} != {weights.shape[0]} outputs"
            )
        y = y + bias
    return y.astype(DTYPE, copy=False)


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax over a flat vector (computed in float64)."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if z.size == 0:
        raise ValidationError("softmax of an empty vector")
    e = np.exp(z - z.max())
    return e / e.sum()
