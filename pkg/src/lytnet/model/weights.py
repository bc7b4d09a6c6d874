"""Named weight sets and the ``.lyt2`` binary weight file.

File layout (little-endian)::

    b"LYT2" | u32 version (=1) | u32 tensor_count
    | u32 header_len | header_len bytes of UTF-8 JSON
    | tensor_count x ( u16 name_len | name | u8 dtype (0 = f32) | u8 ndim
                       | u32 dims[ndim] | prod(dims) f32 values )

Anything after the last tensor is an error.

Weight names are ``layer{row}.{part}.{param}``:

* ``conv`` (plain conv rows), ``expand``, ``dw``, ``project``: ``weight``,
  ``scale``, ``shift`` and an optional ``bias``
* ``se_reduce``, ``se_expand``: ``weight`` (out, in) and ``bias``
* ``fc``: ``weight`` (9, 1280) and ``bias`` (9)

The header JSON may carry ``classes`` (list of class names) and
``input_mean``/``input_std`` (3 values each), applied after pixel/255.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FormatError, ValidationError
from .spec import CLASSES, NetworkSpec

MAGIC = b"LYT2"
VERSION = 1
DTYPE_F32 = 0


@dataclass
class Weights:
    tensors: dict = field(default_factory=dict)
    header: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.tensors[name]

    def get(self, name, default=None):
        return self.tensors.get(name, default)

    def __contains__(self, name):
        return name in self.tensors

    def __len__(self):
        return len(self.tensors)


def _conv_slots(prefix, out_ch, in_ch, k, optional_bias=True):
    slots = {
        f"{prefix}.weight": (out_ch, in_ch, k, k),
        f"{prefix}.scale": (out_ch,),
        f"{prefix}.shift": (out_ch,),
    }
    optional = {f"{prefix}.bias": (out_ch,)} if optional_bias else {}
    return slots, optional


def weight_slots(spec: NetworkSpec):
    """Return ``(required, optional)`` dicts mapping weight name to shape."""
    required, optional = {}, {}

    def add(pair):
        required.update(pair[0])
        optional.update(pair[1])

    for r in spec.resolved:
        layer, name, cin = r.layer, r.name, r.in_channels
        if layer.kind == "conv2d":
            add(_conv_slots(f"{name}.conv", layer.c, cin, layer.k))
        elif layer.kind == "bneck":
            e = layer.e
            add(_conv_slots(f"{name}.expand", e, cin, 1))
            add(_conv_slots(f"{name}.dw", e, 1, layer.k))
            if layer.use_se:
                red = r.se_channels
                required[f"{name}.se_reduce.weight"] = (red, e)
                required[f"{name}.se_reduce.bias"] = (red,)
                required[f"{name}.se_expand.weight"] = (e, red)
                required[f"{name}.se_expand.bias"] = (e,)
            add(_conv_slots(f"{name}.project", layer.c, e, 1))
        elif layer.kind == "fc":
            required[f"{name}.fc.weight"] = (spec.head_dim, cin)
            required[f"{name}.fc.bias"] = (spec.head_dim,)
    return required, optional


@dataclass
class ValidationReport:
    missing: list = field(default_factory=list)
    unexpected: list = field(default_factory=list)
    mismatched: list = field(default_factory=list)  # (name, expected, actual)
    nonfinite: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.missing or self.unexpected or self.mismatched or self.nonfinite)

    def summary(self) -> str:
        if self.ok:
            return "weights ok"
        parts = []
        if self.missing:
            parts.append(f"{len(self.missing)} missing (first: {self.missing[0]})")
        if self.unexpected:
            parts.append(f"{len(self.unexpected)} unexpected (first: {self.unexpected[0]})")
        for name, want, got in self.mismatched[:3]:
            parts.append(f"{name} shape {got} != {want}")
        if self.nonfinite:
            parts.append(f"non-finite values in {self.nonfinite[0]}")
        return "; ".join(parts)


def validate_weights(weights: Weights, spec: NetworkSpec) -> ValidationReport:
    required, optional = weight_slots(spec)
    report = ValidationReport()
    report.missing = [n for n in required if n not in weights.tensors]
    for name, arr in weights.tensors.items():
        want = required.get(name, optional.get(name))
        if want is None:
            report.unexpected.append(name)
        elif tuple(arr.shape) != want:
            report.mismatched.append((name, want, tuple(arr.shape)))
        elif not np.all(np.isfinite(arr)):
            report.nonfinite.append(name)
    classes = weights.header.get("classes")
    if classes is not None and list(classes) != list(CLASSES):
        report.mismatched.append(("header.classes", list(CLASSES), list(classes)))
    for key in ("input_mean", "input_std"):
        val = weights.header.get(key)
        if val is not None and len(val) != spec.input_shape[0]:
            report.mismatched.append((f"header.{key}", (spec.input_shape[0],), (len(val),)))
    return report


def random_weights(spec: NetworkSpec, seed=0) -> Weights:
    """Fan-in scaled Gaussian weights for testing and benchmarking."""
    rng = np.random.default_rng(seed)
    required, _ = weight_slots(spec)
    tensors = {}
    for name, shape in required.items():
        param = name.rsplit(".", 1)[1]
        if param == "weight":
            fan_in = int(np.prod(shape[1:]))
            arr = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        elif param == "scale":
            arr = rng.uniform(0.5, 1.0, shape)
        else:
            arr = rng.normal(0.0, 0.1, shape)
        tensors[name] = arr.astype(np.float32)
    return Weights(tensors, {"classes": list(CLASSES)})


def dumps_weights(weights: Weights) -> bytes:
    header = json.dumps(weights.header, sort_keys=True).encode("utf-8")
    out = [MAGIC, struct.pack("<III", VERSION, len(weights.tensors), len(header)), header]
    for name, arr in weights.tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)))
        out.append(raw)
        out.append(struct.pack("<BB", DTYPE_F32, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def save_weights(weights: Weights, path) -> None:
    Path(path).write_bytes(dumps_weights(weights))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        end = self.pos + n
        if end > len(self.data):
            raise FormatError(f"truncated file while reading {what} at byte {self.pos}")
        chunk = self.data[self.pos : end]
        self.pos = end
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def loads_weights(data: bytes) -> Weights:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad magic, not a .lyt2 file")
    version, count, header_len = r.unpack("<III", "preamble")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    try:
        header = json.loads(r.take(header_len, "header").decode("utf-8")) if header_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"header is not valid UTF-8 JSON: {exc}") from None
    if not isinstance(header, dict):
        raise FormatError("header JSON must be an object")
    tensors = {}
    for i in range(count):
        (name_len,) = r.unpack("<H", f"tensor {i} name length")
        try:
            name = r.take(name_len, f"tensor {i} name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"tensor {i} name is not UTF-8") from None
        dtype, ndim = r.unpack("<BB", f"{name} dtype")
        if dtype != DTYPE_F32:
            raise FormatError(f"{name}: unsupported dtype code {dtype}")
        dims = r.unpack(f"<{ndim}I", f"{name} dims")
        n = int(np.prod(dims, dtype=np.int64))
        raw = r.take(4 * n, f"{name} data")
        if name in tensors:
            raise FormatError(f"duplicate tensor name {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(dims)
    if r.pos != len(data):
        raise FormatError(f"{len(data) - r.pos} trailing bytes after last tensor")
    return Weights(tensors, header)


def load_weights(path) -> Weights:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read weight file {path}: {exc.strerror}") from None
    return loads_weights(data)


def require_valid(weights: Weights, spec: NetworkSpec) -> None:
    report = validate_weights(weights, spec)
    if not report.ok:
        raise ValidationError(f"weights do not match network spec: {report.summary()}")
