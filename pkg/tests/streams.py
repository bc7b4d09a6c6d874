"""Scripted observation streams with hand-traced expected event logs.

All streams use the default 768x576 frame, identity homography and a
61 ms frame period. Pixel x of a normalized coordinate is ``x * 767``;
the position band is 383.5 +/- 65.28 px.
"""

import numpy as np

from lytnet.guidance import FrameObservation

PERIOD = 61
RED = (1.0, 0.0, 0.0, 0.0, 0.0)
GREEN = (0.0, 1.0, 0.0, 0.0, 0.0)
NONE = (0.0, 0.0, 0.0, 0.0, 1.0)
CENTERED = (0.5, 0.95, 0.5, 0.3)


def drift_left():
    """Start point at x = 0.40 * 767 = 306.8 px drifting further left, always
    below the 318.22 px band edge -> MoveRight at t=0, then not again until
    the first frame at or after 2000 ms (frame 33, t=2013)."""
    frames = []
    for i in range(40):
        xs = 0.40 - 0.0025 * i
        frames.append(FrameObservation(i * PERIOD, NONE, (xs, 0.95, xs, 0.3)))
    expected = [(0, "MoveRight"), (2013, "MoveRight")]
    return frames, expected


def in_range_red():
    """Centred and straight from frame 0; red at probability 1. The window
    fills on frame 4 (t=244). The next same-mode announcement needs
    t >= 3244, first met on frame 54 (t=3294)."""
    frames = [FrameObservation(i * PERIOD, RED, CENTERED) for i in range(60)]
    expected = [
        (0, "PositionOk"),
        (0, "OrientationOk"),
        (244, "LightRed"),
        (3294, "LightRed"),
    ]
    return frames, expected


def red_to_green():
    """Ten red frames then ten green. Sliding-window green mass after k
    green frames is k/5, reaching 0.8 on the 4th green frame (frame 13,
    t=793); the mode change is announced at once."""
    frames = [FrameObservation(i * PERIOD, RED if i < 10 else GREEN, CENTERED) for i in range(20)]
    expected = [
        (0, "PositionOk"),
        (0, "OrientationOk"),
        (244, "LightRed"),
        (793, "LightGreen"),
    ]
    return frames, expected


SCRIPTED = {"drift_left": drift_left, "in_range_red": in_range_red, "red_to_green": red_to_green}


def random_stream(seed):
    """Random walk over position/orientation with bursts of steady lights."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 80))
    t = int(rng.integers(0, 100))
    steady = rng.random() < 0.5
    spread, drift = (0.05, 0.008) if steady else (0.3, 0.04)
    xs, xe = rng.uniform(0.5 - spread, 0.5 + spread), rng.uniform(0.5 - spread, 0.5 + spread)
    frames = []
    mode = int(rng.integers(5))
    for _ in range(n):
        t += int(rng.integers(1, 200 if steady else 400))
        xs = float(np.clip(xs + rng.normal(0, drift), -0.1, 1.1))
        xe = float(np.clip(xe + rng.normal(0, drift * 1.2), -0.1, 1.1))
        if rng.random() < 0.15:
            mode = int(rng.integers(5))
        if rng.random() < 0.7:
            probs = np.full(5, 0.02)
            probs[mode] = 0.92
        else:
            probs = rng.dirichlet(np.ones(5))
        probs = probs / probs.sum()
        frames.append(FrameObservation(t, tuple(probs), (xs, 0.95, xe, 0.3)))
    return frames


def to_jsonl(frames):
    import json

    return "".join(
        json.dumps({"t_ms": f.t_ms, "probs": list(f.probs), "coords": list(f.coords)}) + "\n"
        for f in frames
    )
