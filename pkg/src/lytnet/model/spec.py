"""Declarative description of the LytNetV2 graph.

The default graph has 17 rows. Rows are numbered from 1 and the number is
reused in weight names (``layer{row}.…``).

The published table lists the first bottleneck's input as 384 wide, which
cannot follow a stride-2 max pool over a 384-wide map. Here it runs at
192x144, which is what the rest of the shape chain (ending at 12x9) needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from ..errors import ConfigurationError, LayerError

CLASSES = ("red", "green", "countdown_green", "countdown_blank", "none")
NUM_CLASSES = len(CLASSES)
NUM_COORDS = 4
INPUT_SHAPE = (3, 576, 768)
SE_REDUCTION = 4

KINDS = ("conv2d", "maxpool", "bneck", "avgpool", "fc")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    k: Optional[int] = None
    e: Optional[int] = None
    c: Optional[int] = None
    use_se: bool = False
    nl: Optional[str] = None
    s: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        if self.s not in (1, 2):
            raise ConfigurationError(f"stride must be 1 or 2, got {self.s}")
        if self.kind in ("conv2d", "bneck") and self.k not in (1, 3, 5):
            raise ConfigurationError(f"kernel must be 1, 3 or 5, got {self.k}")
        if self.nl not in (None, "RE", "HS"):
            raise ConfigurationError(f"unknown nonlinearity {self.nl!r}")
        if self.kind == "bneck" and (self.e is None or self.c is None or self.e < self.c):
            raise ConfigurationError(f"bneck needs e >= c, got e={self.e} c={self.c}")


@dataclass(frozen=True)
class LayerShape:
    """A spec row resolved against concrete input/output shapes."""

    row: int
    layer: LayerSpec
    input_shape: tuple
    output_shape: tuple

    @property
    def name(self) -> str:
        return f"layer{self.row}"

    @property
    def in_channels(self) -> int:
        return self.input_shape[0]

    @property
    def residual(self) -> bool:
        return (
            self.layer.kind == "bneck"
            and self.layer.s == 1
            and self.input_shape[0] == self.output_shape[0]
        )

    @property
    def se_channels(self) -> int:
        return self.layer.e // SE_REDUCTION


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_shape: tuple = INPUT_SHAPE
    num_classes: int = NUM_CLASSES
    num_coords: int = NUM_COORDS
    resolved: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "resolved", tuple(_chain(self)))

    @property
    def head_dim(self) -> int:
        return self.num_classes + self.num_coords

    def shape_chain(self) -> list:
        """Output shape of every row, in order."""
        return [r.output_shape for r in self.resolved]


def _chain(spec: NetworkSpec):
    shape = spec.input_shape
    if len(shape) != 3 or min(shape) < 1:
        raise ConfigurationError(f"bad input shape {shape}")
    for row, layer in enumerate(spec.layers, start=1):
        c, h, w = shape if len(shape) == 3 else (shape[0], 1, 1)
        name = f"layer{row}"
        if layer.kind in ("conv2d", "bneck"):
            if len(shape) != 3:
                raise LayerError(name, f"{layer.kind} needs a feature map, got {shape}")
            out = (layer.c, math.ceil(h / layer.s), math.ceil(w / layer.s))
        elif layer.kind == "maxpool":
            if layer.s != 2 or h % 2 or w % 2:
                raise LayerError(name, f"2x2 max pool needs even dims and stride 2, got {shape}")
            out = (c, h // 2, w // 2)
        elif layer.kind == "avgpool":
            out = (c, 1, 1)
        else:
            if len(shape) == 3 and (h, w) != (1, 1):
                raise LayerError(name, f"fc needs a pooled input, got {shape}")
            if row != len(spec.layers):
                raise LayerError(name, "fc must be the final layer")
            out = (spec.head_dim,)
        yield LayerShape(row, layer, shape, out)
        shape = out
    if shape != (spec.head_dim,):
        raise ConfigurationError(f"network must end in an fc head of {spec.head_dim}, got {shape}")


DEFAULT_LAYERS = (
    LayerSpec("conv2d", k=3, c=16, nl="HS", s=2),
    LayerSpec("maxpool", k=2, s=2),
    LayerSpec("bneck", k=3, e=16, c=16, nl="RE", s=1),
    LayerSpec("bneck", k=3, e=64, c=24, nl="RE", s=2),
    LayerSpec("bneck", k=3, e=72, c=24, nl="RE", s=1),
    LayerSpec("bneck", k=5, e=72, c=40, use_se=True, nl="RE", s=2),
    LayerSpec("bneck", k=5, e=120, c=40, use_se=True, nl="RE", s=1),
    LayerSpec("bneck", k=3, e=240, c=80, nl="HS", s=2),
    LayerSpec("bneck", k=3, e=200, c=80, nl="HS", s=1),
    LayerSpec("bneck", k=3, e=480, c=112, use_se=True, nl="HS", s=1),
    LayerSpec("bneck", k=5, e=672, c=160, use_se=True, nl="HS", s=2),
    LayerSpec("bneck", k=5, e=960, c=160, use_se=True, nl="HS", s=1),
    LayerSpec("bneck", k=3, e=960, c=320, nl="RE", s=1),
    LayerSpec("conv2d", k=1, c=960, nl="HS", s=1),
    LayerSpec("avgpool"),
    LayerSpec("conv2d", k=1, c=1280, nl="HS", s=1),
    LayerSpec("fc"),
)


def build_default_spec(input_shape=INPUT_SHAPE) -> NetworkSpec:
    """The LytNetV2 graph. A smaller ``input_shape`` gives a toy-sized twin."""
    return NetworkSpec(DEFAULT_LAYERS, input_shape=input_shape)
