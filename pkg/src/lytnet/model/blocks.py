"""Squeeze-excite gate and inverted-residual bottleneck block."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ConfigurationError
from ..tensor import (
    ACTIVATIONS,
    DTYPE,
    ConvParams,
    as_tensor,
    conv2d,
    depthwise_conv2d,
    fully_connected,
    global_avgpool,
    hard_sigmoid,
    relu,
)


@dataclass(frozen=True)
class SqueezeExcite:
    reduce_weight: np.ndarray  # (e // r, e)
    reduce_bias: np.ndarray
    expand_weight: np.ndarray  # (e, e // r)
    expand_bias: np.ndarray

    def __post_init__(self):
        red, e = np.shape(self.reduce_weight)
        if np.shape(self.expand_weight) != (e, red):
            raise ConfigurationError(
                f"SE expand weight {np.shape(self.expand_weight)} does not mirror reduce {(red, e)}"
            )

    @property
    def channels(self) -> int:
        return np.shape(self.reduce_weight)[1]

    @property
    def reduction(self) -> int:
        return self.channels // np.shape(self.reduce_weight)[0]

    def gate(self, x: np.ndarray) -> np.ndarray:
        pooled = global_avgpool(x).reshape(-1)
        hidden = relu(fully_connected(pooled, self.reduce_weight, self.reduce_bias))
        return hard_sigmoid(fully_connected(hidden, self.expand_weight, self.expand_bias))


def squeeze_excite(x, se: SqueezeExcite) -> np.ndarray:
    """Scale each channel of ``x`` by its gate in [0, 1]."""
    x = as_tensor(x, name="SE input")
    if x.shape[0] != se.channels:
        raise ConfigurationError(f"SE expects {se.channels} channels, input has {x.shape[0]}")
    return (x * se.gate(x)[:, None, None]).astype(DTYPE, copy=False)


@dataclass(frozen=True)
class BottleneckBlock:
    """1x1 expand -> kxk depthwise -> optional SE -> linear 1x1 project."""

    expand: ConvParams
    dw: ConvParams
    project: ConvParams
    se: Optional[SqueezeExcite] = None
    nl: str = "RE"
    residual: Optional[bool] = None

    def __post_init__(self):
        e = self.expand.out_channels
        if self.expand.kernel != (1, 1) or self.project.kernel != (1, 1):
            raise ConfigurationError("expand and project convs must be 1x1")
        if not self.dw.depthwise or self.dw.in_channels != e:
            raise ConfigurationError(f"depthwise conv must have {e} channels")
        if self.project.in_channels != e:
            raise ConfigurationError(f"project conv must take {e} channels")
        if self.se is not None and self.se.channels != e:
            raise ConfigurationError(f"SE must act on {e} channels")
        if self.nl not in ("RE", "HS"):
            raise ConfigurationError(f"unknown nonlinearity {self.nl!r}")
        rule = self.dw.stride == 1 and self.in_channels == self.out_channels
        if self.residual is None:
            object.__setattr__(self, "residual", rule)
        elif self.residual != rule:
            raise ConfigurationError(
                "residual must be set iff stride == 1 and in_channels == out_channels"
            )

    @property
    def in_channels(self) -> int:
        return self.expand.in_channels

    @property
    def out_channels(self) -> int:
        return self.project.out_channels

    @property
    def stride(self) -> int:
        return self.dw.stride


def bottleneck_forward(x, block: BottleneckBlock) -> np.ndarray:
    x = as_tensor(x, name="bneck input")
    if x.shape[0] != block.in_channels:
        raise ConfigurationError(
            f"bneck expects {block.in_channels} channels, input has {x.shape[0]}"
        )
    act = ACTIVATIONS[block.nl]
    y = act(conv2d(x, block.expand))
    y = act(depthwise_conv2d(y, block.dw))
    if block.se is not None:
        y = squeeze_excite(y, block.se)
    y = conv2d(y, block.project)
    if block.residual:
        y += x
    return y
