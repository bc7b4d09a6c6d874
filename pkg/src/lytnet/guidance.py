"""Crossing guidance: turns per-frame network outputs into user notifications.

A session walks through three stages. *Positioning* keeps the midline start
point inside a band around the image centre. *Orienting* keeps the midline
within an angular band of camera-forward. *Monitoring* announces the
smoothed traffic-light mode. Losing position or orientation drops the
session back to the matching stage.

Geometry conventions:

* normalized coords map to pixels as ``x * (w - 1)``, ``y * (h - 1)``, so
  0.5 lands exactly on the centre line ``(w - 1) / 2``;
* the homography maps image pixels to bird's-eye pixels, and the position
  test runs on the bird's-eye x of the start point;
* camera-forward is the image's centre column (bottom to middle) mapped
  through the homography; a positive angle means the midline leans right of it.

Timing: an instruction kind is never repeated within ``renotify_ms`` and a
light mode is never repeated within ``light_repeat_ms``. The timers are per
kind, so a switch to a different instruction or mode goes out on the same
frame unless that kind itself fired recently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DegeneratePointError,
    SessionError,
    UndefinedDirectionError,
    ValidationError,
)
from .model.spec import CLASSES

W_FLOOR = 1e-9
DEFAULT_WIDTH, DEFAULT_HEIGHT = 768, 576

MODES = ("red", "green", "countdown", "none")
# rows: modes, cols: network classes
_MERGE = np.array(
    [
        [1, 0, 0, 0, 0],
        [0, 1, 0, 0, 0],
        [0, 0, 1, 1, 0],
        [0, 0, 0, 0, 1],
    ],
    dtype=np.float64,
)


class Kind(str, Enum):
    MoveLeft = "MoveLeft"
    MoveRight = "MoveRight"
    PositionOk = "PositionOk"
    RotateLeft = "RotateLeft"
    RotateRight = "RotateRight"
    OrientationOk = "OrientationOk"
    LightRed = "LightRed"
    LightGreen = "LightGreen"
    LightCountdown = "LightCountdown"
    LightNone = "LightNone"


IN_RANGE = "InRange"

CHANNELS = {
    Kind.MoveLeft: "vibration",
    Kind.MoveRight: "vibration",
    Kind.RotateLeft: "beep1",
    Kind.RotateRight: "beep2",
    Kind.PositionOk: "voice",
    Kind.OrientationOk: "voice",
    Kind.LightRed: "voice",
    Kind.LightGreen: "voice",
    Kind.LightCountdown: "voice",
    Kind.LightNone: "voice",
}

INSTRUCTIONS = (Kind.MoveLeft, Kind.MoveRight, Kind.RotateLeft, Kind.RotateRight)
LIGHT_KINDS = {
    "red": Kind.LightRed,
    "green": Kind.LightGreen,
    "countdown": Kind.LightCountdown,
    "none": Kind.LightNone,
}


class Stage(str, Enum):
    Positioning = "Positioning"
    Orienting = "Orienting"
    Monitoring = "Monitoring"


@dataclass(frozen=True)
class Homography:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.size != 9:
            raise ConfigurationError(f"homography needs 9 values, got {m.size}")
        m = m.reshape(3, 3)
        if not np.all(np.isfinite(m)) or abs(np.linalg.det(m)) <= 1e-9:
            raise ConfigurationError("homography must be finite and invertible")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    @property
    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


def to_ground(point, h: Homography) -> tuple[float, float]:
    """Map an image pixel to the bird's-eye plane."""
    x, y = point
    gx, gy, gw = h.matrix @ np.array([x, y, 1.0])
    if gw <= W_FLOOR:
        raise DegeneratePointError(f"point ({x}, {y}) is at or beyond the horizon")
    return float(gx / gw), float(gy / gw)


def position_instruction(x_int: float, width: float, band: float = 0.085) -> str:
    if width <= 0:
        raise ValidationError(f"image width must be positive, got {width}")
    mid = (width - 1) / 2
    if x_int > mid + width * band:
        return Kind.MoveLeft
    if x_int < mid - width * band:
        return Kind.MoveRight
    return IN_RANGE


def orientation_instruction(delta_theta: float, band_deg: float = 10.0) -> str:
    if not math.isfinite(delta_theta):
        raise ValidationError(f"angle must be finite, got {delta_theta}")
    if delta_theta < -band_deg:
        return Kind.RotateLeft
    if delta_theta > band_deg:
        return Kind.RotateRight
    return IN_RANGE


def _to_pixels(x, y, width, height):
    return x * (width - 1), y * (height - 1)


def delta_theta(coords, h: Homography, width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT) -> float:
    """Signed angle (degrees) of the ground-plane midline from camera-forward."""
    xs, ys, xe, ye = coords
    sx, sy = to_ground(_to_pixels(xs, ys, width, height), h)
    ex, ey = to_ground(_to_pixels(xe, ye, width, height), h)
    cx = (width - 1) / 2
    bx, by = to_ground((cx, height - 1), h)
    mx, my = to_ground((cx, (height - 1) / 2), h)
    dx, dy = ex - sx, ey - sy
    fx, fy = mx - bx, my - by
    if math.hypot(dx, dy) == 0.0:
        raise UndefinedDirectionError("midline start and end coincide on the ground plane")
    if math.hypot(fx, fy) == 0.0:
        raise UndefinedDirectionError("camera-forward axis collapses under the homography")
    return math.degrees(math.atan2(fx * dy - fy * dx, fx * dx + fy * dy))


class LightReading(NamedTuple):
    mode: str
    confidence: float
    actionable: bool


def smoothed_light_mode(window: Sequence, threshold=0.8, full=5) -> LightReading:
    """Average class probabilities over the window and merge the countdown classes."""
    if len(window) == 0:
        raise ValidationError("light window is empty")
    avg = np.mean(np.asarray(window, dtype=np.float64), axis=0)
    merged = _MERGE @ avg
    i = int(np.argmax(merged))
    conf = min(1.0, float(merged[i]))
    return LightReading(MODES[i], conf, len(window) >= full and conf >= threshold)


@dataclass(frozen=True)
class GuidanceConfig:
    homography: Homography = field(default_factory=Homography.identity)
    position_band: float = 0.085
    angle_band_deg: float = 10.0
    confidence_threshold: float = 0.8
    window: int = 5
    renotify_ms: int = 2000
    light_repeat_ms: int = 3000
    frame_period_ms: int = 61

    KEYS = (
        "homography",
        "position_band",
        "angle_band_deg",
        "confidence_threshold",
        "window",
        "renotify_ms",
        "light_repeat_ms",
        "frame_period_ms",
    )

    def __post_init__(self):
        if self.window < 1:
            raise ConfigurationError("window must be >= 1")
        if self.position_band < 0 or self.angle_band_deg < 0:
            raise ConfigurationError("bands must be nonnegative")
        if not 0 <= self.confidence_threshold <= 1:
            raise ConfigurationError("confidence_threshold must be in [0, 1]")
        if self.renotify_ms < 0 or self.light_repeat_ms < 0 or self.frame_period_ms <= 0:
            raise ConfigurationError("timing values must be nonnegative (frame period positive)")

    @classmethod
    def from_dict(cls, data: dict) -> "GuidanceConfig":
        unknown = set(data) - set(cls.KEYS)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "homography" in kwargs:
            kwargs["homography"] = Homography(kwargs["homography"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "GuidanceConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        return cls.from_dict(data)

    def gap(self, kind: Kind) -> int:
        if kind in INSTRUCTIONS:
            return self.renotify_ms
        if kind in LIGHT_KINDS.values():
            return self.light_repeat_ms
        return 0


@dataclass(frozen=True)
class FrameObservation:
    t_ms: int
    probs: tuple
    coords: tuple
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        coords = tuple(float(c) for c in self.coords)
        if len(probs) != len(CLASSES) or len(coords) != 4:
            raise ValidationError("observation needs 5 probabilities and 4 coords")
        if not all(math.isfinite(v) for v in probs + coords):
            raise ValidationError("observation contains non-finite values")
        if min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-5:
            raise ValidationError(f"probabilities are not a distribution: {probs}")
        if self.width < 1 or self.height < 1:
            raise ValidationError("image dimensions must be positive")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "coords", coords)


@dataclass(frozen=True)
class GuidanceEvent:
    t_ms: int
    kind: Kind

    @property
    def channel(self) -> str:
        return CHANNELS[self.kind]

    def to_dict(self) -> dict:
        return {"t_ms": self.t_ms, "kind": self.kind.value, "channel": self.channel}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class GuidanceState:
    stage: Stage = Stage.Positioning
    window: tuple = ()
    last_t: Optional[int] = None
    # kind -> time of its most recent emission
    last_emitted: tuple = ()

    def emitted_at(self, kind) -> Optional[int]:
        return dict(self.last_emitted).get(kind)


def step(state: GuidanceState, obs: FrameObservation, config: GuidanceConfig = GuidanceConfig()):
    """Advance one frame; returns ``(new_state, events)``."""
    t = obs.t_ms
    if state.last_t is not None and t <= state.last_t:
        raise SessionError(f"timestamp {t} ms does not follow {state.last_t} ms")
    window = (state.window + (obs.probs,))[-config.window :]
    emitted = dict(state.last_emitted)
    events = []
    stage = state.stage
    h = config.homography

    def fire(kind):
        last = emitted.get(kind)
        if last is not None and t - last < config.gap(kind):
            return
        events.append(GuidanceEvent(t, kind))
        emitted[kind] = t

    def done():
        new = replace(
            state,
            stage=stage,
            window=window,
            last_t=t,
            last_emitted=tuple(sorted(emitted.items(), key=lambda kv: kv[0].value)),
        )
        return new, events

    coords = tuple(min(1.0, max(0.0, c)) for c in obs.coords)
    try:
        x_int, _ = to_ground(_to_pixels(coords[0], coords[1], obs.width, obs.height), h)
    except DegeneratePointError:
        return done()

    pos = position_instruction(x_int, obs.width, config.position_band)
    if pos != IN_RANGE:
        stage = Stage.Positioning
        fire(pos)
        return done()
    if stage == Stage.Positioning:
        fire(Kind.PositionOk)
        stage = Stage.Orienting

    try:
        angle = delta_theta(coords, h, obs.width, obs.height)
    except (DegeneratePointError, UndefinedDirectionError):
        return done()
    orient = orientation_instruction(angle, config.angle_band_deg)
    if orient != IN_RANGE:
        stage = Stage.Orienting
        fire(orient)
        return done()
    if stage == Stage.Orienting:
        fire(Kind.OrientationOk)
        stage = Stage.Monitoring

    reading = smoothed_light_mode(window, config.confidence_threshold, config.window)
    if reading.actionable:
        fire(LIGHT_KINDS[reading.mode])
    return done()


class GuidanceSession:
    """Stateful convenience wrapper around :func:`step` for one user session."""

    def __init__(self, config: GuidanceConfig = GuidanceConfig()):
        self.config = config
        self.state = GuidanceState()
        self.events: list = []

    def feed(self, obs: FrameObservation) -> list:
        self.state, events = step(self.state, obs, self.config)
        self.events.extend(events)
        return events

    def reset(self):
        self.state = GuidanceState()


def replay(observations, config: GuidanceConfig = GuidanceConfig()) -> list:
    session = GuidanceSession(config)
    for obs in observations:
        session.feed(obs)
    return session.events


def format_event_log(events) -> str:
    return "".join(ev.to_json() + "\n" for ev in events)
