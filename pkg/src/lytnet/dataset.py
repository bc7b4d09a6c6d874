"""Labelled image loading and deterministic augmentation transforms.

Labels live in a CSV with header ``path,class,xs,ys,xe,ye``; image paths are
relative to the CSV's directory and point at binary PPM (P6, maxval <= 255)
files. Images load as float32 ``(3, H, W)`` arrays in [0, 1].

Geometric transforms treat a normalized coordinate ``x`` as pixel position
``x * W``. Every transform takes an explicit seed and returns a new sample.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv

from .errors import FormatError, ValidationError
from .model.spec import CLASSES

LABEL_HEADER = ["path", "class", "xs", "ys", "xe", "ye"]
CROP_SIZE = (768, 576)  # (width, height)


@dataclass(frozen=True)
class LabelRecord:
    path: Path
    class_name: str
    coords: tuple

    @property
    def class_index(self) -> int:
        return CLASSES.index(self.class_name)


@dataclass(frozen=True)
class Sample:
    image: np.ndarray  # (3, H, W) float32 in [0, 1]
    class_name: str
    coords: tuple

    def __post_init__(self):
        if self.class_name not in CLASSES:
            raise ValidationError(f"unknown class {self.class_name!r}")
        img = np.asarray(self.image, dtype=np.float32)
        if img.ndim != 3 or img.shape[0] != 3:
            raise ValidationError(f"sample image must be (3, H, W), got {img.shape}")
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))

    @property
    def class_index(self) -> int:
        return CLASSES.index(self.class_name)

    @property
    def width(self) -> int:
        return self.image.shape[2]

    @property
    def height(self) -> int:
        return self.image.shape[1]


def load_labels(path) -> list[LabelRecord]:
    path = Path(path)
    base = path.parent
    records, seen = [], set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != LABEL_HEADER:
            raise FormatError(f"{path}:1: expected header {','.join(LABEL_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(LABEL_HEADER):
                raise FormatError(f"{path}:{line}: expected 6 fields, got {len(row)}")
            rel, cls = row[0].strip(), row[1].strip()
            if cls not in CLASSES:
                raise FormatError(f"{path}:{line}: unknown class {cls!r}")
            try:
                coords = tuple(float(v) for v in row[2:])
            except ValueError:
                raise FormatError(f"{path}:{line}: coordinates must be numbers") from None
            if not all(0.0 <= c <= 1.0 for c in coords):
                raise FormatError(f"{path}:{line}: coordinates must lie in [0, 1]")
            if rel in seen:
                raise FormatError(f"{path}:{line}: duplicate path {rel!r}")
            seen.add(rel)
            records.append(LabelRecord(base / rel, cls, coords))
    return records


_PPM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def load_image(path) -> np.ndarray:
    """Read an 8-bit binary PPM into a (3, H, W) float32 array in [0, 1]."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read image {path}: {exc.strerror}") from None
    return decode_ppm(data, name=str(path))


def decode_ppm(data: bytes, name="image") -> np.ndarray:
    pos, tokens = 0, []
    for _ in range(4):
        m = _PPM_TOKEN.match(data, pos)
        if m is None:
            raise FormatError(f"{name}: truncated PPM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P6":
        raise FormatError(f"{name}: only binary P6 PPM is supported, got {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{name}: malformed PPM header") from None
    if width < 1 or height < 1:
        raise FormatError(f"{name}: bad dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise FormatError(f"{name}: only 8-bit PPM is supported (maxval {maxval})")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError(f"{name}: missing whitespace after PPM header")
    pos += 1
    n = width * height * 3
    raster = data[pos : pos + n]
    if len(raster) != n:
        raise FormatError(f"{name}: expected {n} raster bytes, found {len(raster)}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return np.ascontiguousarray(pixels.transpose(2, 0, 1), dtype=np.float32) / np.float32(maxval)


def encode_ppm(image) -> bytes:
    """Encode a (3, H, W) [0, 1] image as 8-bit P6 (values rounded)."""
    img = np.asarray(image, dtype=np.float64)
    _, h, w = img.shape
    pixels = np.clip(np.rint(img * 255), 0, 255).astype(np.uint8).transpose(1, 2, 0)
    return b"P6\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def save_image(image, path) -> None:
    Path(path).write_bytes(encode_ppm(image))


def load_sample(record: LabelRecord) -> Sample:
    return Sample(load_image(record.path), record.class_name, record.coords)


def _clip01(v):
    return min(1.0, max(0.0, v))


def crop(sample: Sample, x0: int, y0: int, width: int, height: int) -> Sample:
    """Cut a window at pixel offset ``(x0, y0)``; coords are clamped to the window."""
    if width > sample.width or height > sample.height:
        raise ValidationError(
            f"crop {width}x{height} larger than source {sample.width}x{sample.height}"
        )
    if not (0 <= x0 <= sample.width - width and 0 <= y0 <= sample.height - height):
        raise ValidationError(f"crop offset ({x0}, {y0}) out of range")
    img = sample.image[:, y0 : y0 + height, x0 : x0 + width]
    xs, ys, xe, ye = sample.coords
    W, H = sample.width, sample.height
    coords = (
        _clip01((xs * W - x0) / width),
        _clip01((ys * H - y0) / height),
        _clip01((xe * W - x0) / width),
        _clip01((ye * H - y0) / height),
    )
    return replace(sample, image=np.ascontiguousarray(img), coords=coords)


def random_crop(sample: Sample, target=CROP_SIZE, seed=None) -> Sample:
    width, height = target
    if width > sample.width or height > sample.height:
        raise ValidationError(
            f"source {sample.width}x{sample.height} smaller than crop {width}x{height}"
        )
    rng = np.random.default_rng(seed)
    x0 = int(rng.integers(0, sample.width - width + 1))
    y0 = int(rng.integers(0, sample.height - height + 1))
    return crop(sample, x0, y0, width, height)


def horizontal_flip(sample: Sample, probability=0.5, seed=None) -> Sample:
    rng = np.random.default_rng(seed)
    if not rng.random() < probability:
        return sample
    xs, ys, xe, ye = sample.coords
    img = np.ascontiguousarray(sample.image[:, :, ::-1])
    return replace(sample, image=img, coords=(1.0 - xs, ys, 1.0 - xe, ye))


# Rec. 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def _grayscale(img):
    return np.tensordot(_LUMA, img, axes=1)


def adjust_brightness(img, factor):
    return np.clip(img * np.float32(factor), 0.0, 1.0).astype(np.float32)


def adjust_contrast(img, factor):
    mean = np.float32(_grayscale(img).mean())
    return np.clip((img - mean) * np.float32(factor) + mean, 0.0, 1.0).astype(np.float32)


def adjust_saturation(img, factor):
    gray = _grayscale(img)[None]
    return np.clip((img - gray) * np.float32(factor) + gray, 0.0, 1.0).astype(np.float32)


def adjust_hue(img, shift):
    """Rotate hue by ``shift`` turns (1.0 = full circle)."""
    if shift == 0:
        return np.asarray(img, dtype=np.float32).copy()
    hsv = rgb_to_hsv(np.clip(np.moveaxis(img, 0, -1), 0.0, 1.0))
    hsv[..., 0] = (hsv[..., 0] + shift) % 1.0
    return np.clip(np.moveaxis(hsv_to_rgb(hsv), -1, 0), 0.0, 1.0).astype(np.float32)


def color_jitter(sample: Sample, brightness=0.4, saturation=0.4, contrast=0.4, hue=0.1, seed=None) -> Sample:
    """Random photometric jitter, applied as brightness -> contrast -> saturation -> hue.

    The first three draw a factor from ``[max(0, 1 - r), 1 + r]``; hue draws a
    shift from ``[-hue, hue]`` turns. Zero ranges leave the image unchanged.
    """
    for name, r in (("brightness", brightness), ("saturation", saturation),
                    ("contrast", contrast), ("hue", hue)):
        if r < 0:
            raise ValidationError(f"{name} range must be nonnegative, got {r}")
    rng = np.random.default_rng(seed)

    def factor(r):
        return rng.uniform(max(0.0, 1.0 - r), 1.0 + r)

    b, c, s = factor(brightness), factor(contrast), factor(saturation)
    h = rng.uniform(-hue, hue)
    img = sample.image
    if brightness:
        img = adjust_brightness(img, b)
    if contrast:
        img = adjust_contrast(img, c)
    if saturation:
        img = adjust_saturation(img, s)
    if hue:
        img = adjust_hue(img, h)
    return replace(sample, image=np.asarray(img, dtype=np.float32))


def resize_bilinear(img, width: int, height: int) -> np.ndarray:
    """Bilinear resize with half-pixel centres and edge clamping."""
    img = np.asarray(img, dtype=np.float32)
    _, h, w = img.shape
    if (h, w) == (height, width):
        return img.copy()

    def axis(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, (src - lo).astype(np.float32)

    y0, y1, fy = axis(height, h)
    x0, x1, fx = axis(width, w)
    top = img[:, y0][:, :, x0] * (1 - fx) + img[:, y0][:, :, x1] * fx
    bot = img[:, y1][:, :, x0] * (1 - fx) + img[:, y1][:, :, x1] * fx
    return (top * (1 - fy)[:, None] + bot * fy[:, None]).astype(np.float32)
