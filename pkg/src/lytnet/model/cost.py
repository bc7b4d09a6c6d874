"""Parameter and multiply-accumulate (MAC) accounting.

A standard k x k convolution from ``d_i`` to ``d_j`` channels over an
``h x w`` output costs ``h*w*k^2*d_i*d_j`` MACs. A depthwise separable one
(k x k depthwise followed by 1x1 pointwise) costs ``h*w*d_i*(k^2 + d_j)``,
which is cheaper by a factor of ``k^2*d_j / (k^2 + d_j)``.

Parameter counts cover exactly the required slots of the weight file, so
``report.total_params`` equals the number of floats in a complete default
weight set. Scale/shift, bias additions, activations and pooling are not
counted as MACs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .spec import NetworkSpec
from .weights import weight_slots


def standard_conv_macs(h, w, k, d_i, d_j) -> int:
    return h * w * k * k * d_i * d_j


def separable_conv_macs(h, w, k, d_i, d_j) -> int:
    return h * w * d_i * (k * k + d_j)


def separable_ratio(k, d_j) -> float:
    """How many times cheaper a separable conv is than a standard one."""
    return (k * k * d_j) / (k * k + d_j)


@dataclass(frozen=True)
class LayerCost:
    row: int
    kind: str
    input_shape: tuple
    output_shape: tuple
    params: int
    macs: int
    # standard-conv MACs for the same k x k mapping, and the saving factor
    standard_macs: Optional[int] = None
    ratio: Optional[float] = None

    @property
    def name(self):
        return f"layer{self.row}"


@dataclass(frozen=True)
class CostReport:
    layers: tuple

    @property
    def total_params(self) -> int:
        return sum(l.params for l in self.layers)

    @property
    def total_macs(self) -> int:
        return sum(l.macs for l in self.layers)

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "row": l.row,
                    "kind": l.kind,
                    "input": list(l.input_shape),
                    "output": list(l.output_shape),
                    "params": l.params,
                    "macs": l.macs,
                    "standard_macs": l.standard_macs,
                    "ratio": l.ratio,
                }
                for l in self.layers
            ],
            "total_params": self.total_params,
            "total_macs": self.total_macs,
        }


def count_params_and_macs(spec: NetworkSpec) -> CostReport:
    required, _ = weight_slots(spec)
    per_row = {}
    for name, shape in required.items():
        row = int(name.split(".", 1)[0][len("layer"):])
        n = 1
        for d in shape:
            n *= d
        per_row[row] = per_row.get(row, 0) + n

    layers = []
    for r in spec.resolved:
        layer = r.layer
        cin = r.in_channels
        macs, std, ratio = 0, None, None
        if layer.kind == "conv2d":
            _, ho, wo = r.output_shape
            macs = standard_conv_macs(ho, wo, layer.k, cin, layer.c)
        elif layer.kind == "bneck":
            _, hi, wi = r.input_shape
            _, ho, wo = r.output_shape
            e, k, c = layer.e, layer.k, layer.c
            expand = standard_conv_macs(hi, wi, 1, cin, e)
            core = separable_conv_macs(ho, wo, k, e, c)
            se = 2 * e * r.se_channels if layer.use_se else 0
            macs = expand + core + se
            std = standard_conv_macs(ho, wo, k, e, c)
            ratio = separable_ratio(k, c)
        elif layer.kind == "fc":
            macs = cin * spec.head_dim
        layers.append(
            LayerCost(
                row=r.row,
                kind=layer.kind,
                input_shape=r.input_shape,
                output_shape=r.output_shape,
                params=per_row.get(r.row, 0),
                macs=macs,
                standard_macs=std,
                ratio=ratio,
            )
        )
    return CostReport(tuple(layers))
