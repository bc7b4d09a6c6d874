"""Executable LytNetV2 built from a :class:`NetworkSpec` and a weight set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import ConfigurationError, LayerError, ValidationError
from ..tensor import (
    ACTIVATIONS,
    DTYPE,
    ConvParams,
    as_tensor,
    conv2d,
    fully_connected,
    global_avgpool,
    maxpool2x2,
    softmax,
)
from .blocks import BottleneckBlock, SqueezeExcite, bottleneck_forward
from .spec import CLASSES, NetworkSpec, build_default_spec
from .weights import Weights, require_valid


@dataclass(frozen=True)
class Prediction:
    """Two-headed network output.

    ``logits`` follow :data:`CLASSES` order; ``coords`` are
    ``[xs, ys, xe, ye]`` as fractions of image width/height (not clamped).
    """

    logits: np.ndarray
    coords: np.ndarray

    @property
    def probabilities(self) -> np.ndarray:
        return softmax(self.logits)

    @property
    def class_index(self) -> int:
        return int(np.argmax(self.logits))

    @property
    def class_name(self) -> str:
        return CLASSES[self.class_index]

    def to_dict(self) -> dict:
        return {
            "class": self.class_name,
            "probs": [float(p) for p in self.probabilities],
            "coords": [float(c) for c in self.coords],
        }


def _conv(weights: Weights, prefix: str, stride=1, depthwise=False) -> ConvParams:
    return ConvParams(
        weights[f"{prefix}.weight"],
        stride=stride,
        bias=weights.get(f"{prefix}.bias"),
        scale=weights.get(f"{prefix}.scale"),
        shift=weights.get(f"{prefix}.shift"),
        depthwise=depthwise,
    )


def preprocess(image, header: Optional[dict] = None) -> np.ndarray:
    """Apply the per-channel mean/std from a weight header to a [0, 1] image."""
    x = as_tensor(image, name="image")
    header = header or {}
    mean, std = header.get("input_mean"), header.get("input_std")
    if mean is not None:
        x = x - np.asarray(mean, dtype=DTYPE)[:, None, None]
    if std is not None:
        x = x / np.asarray(std, dtype=DTYPE)[:, None, None]
    return np.ascontiguousarray(x, dtype=DTYPE)


class LytNet:
    """Compiled network. Immutable after construction; safe to share across threads."""

    def __init__(self, weights: Weights, spec: Optional[NetworkSpec] = None):
        self.spec = spec or build_default_spec()
        require_valid(weights, self.spec)
        self.header = dict(weights.header)
        self._steps = [self._compile(r, weights) for r in self.spec.resolved]

    def _compile(self, r, weights):
        layer, name = r.layer, r.name
        if layer.kind == "conv2d":
            return (r, _conv(weights, f"{name}.conv", layer.s))
        if layer.kind == "bneck":
            se = None
            if layer.use_se:
                se = SqueezeExcite(
                    weights[f"{name}.se_reduce.weight"],
                    weights[f"{name}.se_reduce.bias"],
                    weights[f"{name}.se_expand.weight"],
                    weights[f"{name}.se_expand.bias"],
                )
            try:
                block = BottleneckBlock(
                    expand=_conv(weights, f"{name}.expand"),
                    dw=_conv(weights, f"{name}.dw", layer.s, depthwise=True),
                    project=_conv(weights, f"{name}.project"),
                    se=se,
                    nl=layer.nl,
                )
            except ConfigurationError as exc:
                raise LayerError(name, str(exc)) from None
            if block.residual != r.residual:
                raise LayerError(name, "residual flag disagrees with the network shape chain")
            return (r, block)
        if layer.kind == "fc":
            return (r, (weights[f"{name}.fc.weight"], weights[f"{name}.fc.bias"]))
        return (r, None)

    def run(self, x, trace: Optional[Callable] = None) -> np.ndarray:
        """Execute every row on an already preprocessed tensor; returns the head vector.

        ``trace(layer_shape, output)`` is called after each row.
        """
        x = as_tensor(x, name="network input")
        if x.shape != self.spec.input_shape:
            raise LayerError("input", f"expected shape {self.spec.input_shape}, got {x.shape}")
        for r, op in self._steps:
            kind = r.layer.kind
            try:
                if kind == "conv2d":
                    x = ACTIVATIONS[r.layer.nl](conv2d(x, op))
                elif kind == "maxpool":
                    x = maxpool2x2(x)
                elif kind == "bneck":
                    x = bottleneck_forward(x, op)
                elif kind == "avgpool":
                    x = global_avgpool(x)
                else:
                    x = fully_connected(x.reshape(-1), *op)
            except (ConfigurationError, ValidationError) as exc:
                raise LayerError(r.name, str(exc)) from None
            if x.shape != r.output_shape:
                raise LayerError(r.name, f"produced {x.shape}, expected {r.output_shape}")
            if trace is not None:
                trace(r, x)
        if not np.all(np.isfinite(x)):
            raise ValidationError("network output contains non-finite values")
        return x

    def forward(self, image, trace: Optional[Callable] = None) -> Prediction:
        """Run a [0, 1] image of the network input shape through the network."""
        out = self.run(preprocess(image, self.header), trace)
        k = self.spec.num_classes
        return Prediction(logits=out[:k].copy(), coords=out[k:].copy())


def forward(image, weights: Weights, spec: Optional[NetworkSpec] = None) -> Prediction:
    return LytNet(weights, spec).forward(image)
