import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lytnet.errors import (
    ConfigurationError,
    DegeneratePointError,
    SessionError,
    UndefinedDirectionError,
    ValidationError,
)
from lytnet.guidance import (
    IN_RANGE,
    FrameObservation,
    GuidanceConfig,
    GuidanceEvent,
    GuidanceSession,
    GuidanceState,
    Homography,
    Kind,
    Stage,
    delta_theta,
    format_event_log,
    orientation_instruction,
    position_instruction,
    replay,
    smoothed_light_mode,
    step,
    to_ground,
)
from streams import CENTERED, GREEN, NONE, RED, SCRIPTED, random_stream

W = 768


def test_to_ground_identity_and_scale():
    assert to_ground((12.5, 40.0), Homography.identity()) == (12.5, 40.0)
    assert to_ground((12.5, 40.0), Homography(np.diag([2.0, 2.0, 1.0]))) == (25.0, 80.0)


def test_to_ground_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = np.eye(3) + rng.normal(0, 0.2, (3, 3))
        m[2] = [rng.normal(0, 1e-4), rng.normal(0, 1e-4), 1.0]
        h = Homography(m)
        p = tuple(rng.uniform(0, 700, 2))
        g = to_ground(p, h)
        back = to_ground(g, h.inverse)
        assert math.hypot(back[0] - p[0], back[1] - p[1]) < 1e-6


def test_to_ground_horizon():
    h = Homography([[1, 0, 0], [0, 1, 0], [0, -0.01, 1]])
    with pytest.raises(DegeneratePointError):
        to_ground((10, 100), h)
    with pytest.raises(DegeneratePointError):
        to_ground((10, 200), h)


def test_homography_must_be_invertible():
    with pytest.raises(ConfigurationError):
        Homography(np.zeros((3, 3)))
    with pytest.raises(ConfigurationError):
        Homography([1, 2, 3])


def test_position_instruction_thresholds():
    assert position_instruction(383.5, W) == IN_RANGE
    assert position_instruction(449.78, W) == Kind.MoveLeft
    assert position_instruction(317.22, W) == Kind.MoveRight
    mid, band = (W - 1) / 2, W * 0.085
    assert position_instruction(mid + band, W) == IN_RANGE
    assert position_instruction(mid - band, W) == IN_RANGE
    with pytest.raises(ValidationError):
        position_instruction(1.0, 0)


@given(st.floats(-200, 1000))
def test_position_reflection_antisymmetry(x):
    a = position_instruction(x, W)
    b = position_instruction((W - 1) - x, W)
    swap = {Kind.MoveLeft: Kind.MoveRight, Kind.MoveRight: Kind.MoveLeft, IN_RANGE: IN_RANGE}
    assert b == swap[a]


def test_orientation_instruction():
    assert orientation_instruction(0) == IN_RANGE
    assert orientation_instruction(-10.5) == Kind.RotateLeft
    assert orientation_instruction(10.5) == Kind.RotateRight
    assert orientation_instruction(10.0) == IN_RANGE
    assert orientation_instruction(-10.0) == IN_RANGE
    with pytest.raises(ValidationError):
        orientation_instruction(float("nan"))


def test_smoothed_light_mode_examples():
    assert smoothed_light_mode([RED] * 5) == ("red", 1.0, True)
    alt = [RED, GREEN, RED, GREEN, RED]
    reading = smoothed_light_mode(alt)
    assert reading.mode == "red" and reading.confidence == pytest.approx(0.6)
    assert not reading.actionable
    cd = (0, 0, 0.5, 0.5, 0)
    assert smoothed_light_mode([cd] * 5) == ("countdown", 1.0, True)
    assert not smoothed_light_mode([RED] * 4).actionable
    with pytest.raises(ValidationError):
        smoothed_light_mode([])


@given(st.lists(st.lists(st.floats(0.001, 1), min_size=5, max_size=5), min_size=1, max_size=5))
def test_smoothed_confidence_bounded(rows):
    window = [np.array(r) / sum(r) for r in rows]
    reading = smoothed_light_mode(window)
    assert 0 < reading.confidence <= 1
    if len(window) < 5:
        assert not reading.actionable


def _coords_at_angle(deg, w=768, h=576, start=(383.5, 540.0), length=300.0):
    sx, sy = start
    ex = sx + length * math.sin(math.radians(deg))
    ey = sy - length * math.cos(math.radians(deg))
    return (sx / (w - 1), sy / (h - 1), ex / (w - 1), ey / (h - 1))


def test_delta_theta_identity():
    h = Homography.identity()
    assert delta_theta((0.3, 0.9, 0.3, 0.2), h) == 0
    assert delta_theta(_coords_at_angle(15), h) == pytest.approx(15, abs=1e-9)
    assert delta_theta(_coords_at_angle(-32), h) == pytest.approx(-32, abs=1e-9)


@given(st.floats(-80, 80), st.floats(0.1, 0.9))
def test_delta_theta_mirror_antisymmetry(deg, xs):
    c = _coords_at_angle(deg, start=(xs * 767, 540.0))
    mirrored = (1 - c[0], c[1], 1 - c[2], c[3])
    h = Homography.identity()
    assert delta_theta(mirrored, h) == pytest.approx(-delta_theta(c, h), abs=1e-9)


def test_delta_theta_under_scaling_homography():
    # uniform ground scaling preserves angles
    h = Homography(np.diag([3.0, 3.0, 1.0]))
    assert delta_theta(_coords_at_angle(20), h) == pytest.approx(20, abs=1e-9)


def test_delta_theta_degenerate():
    with pytest.raises(UndefinedDirectionError):
        delta_theta((0.5, 0.5, 0.5, 0.5), Homography.identity())


def test_events_carry_channels():
    assert GuidanceEvent(5, Kind.RotateLeft).channel == "beep1"
    assert GuidanceEvent(5, Kind.RotateRight).channel == "beep2"
    assert GuidanceEvent(5, Kind.MoveLeft).channel == "vibration"
    for k in (Kind.PositionOk, Kind.OrientationOk, Kind.LightRed, Kind.LightNone):
        assert GuidanceEvent(5, k).channel == "voice"
    line = GuidanceEvent(61, Kind.LightGreen).to_json()
    assert json.loads(line) == {"t_ms": 61, "kind": "LightGreen", "channel": "voice"}
    assert line == '{"t_ms": 61, "kind": "LightGreen", "channel": "voice"}'


@pytest.mark.parametrize("name", sorted(SCRIPTED))
def test_scripted_streams(name):
    frames, expected = SCRIPTED[name]()
    events = replay(frames)
    assert [(e.t_ms, e.kind.value) for e in events] == expected


def test_red_to_green_ignores_three_second_timer():
    frames, _ = SCRIPTED["red_to_green"]()
    events = replay(frames)
    red = next(e for e in events if e.kind == Kind.LightRed)
    green = next(e for e in events if e.kind == Kind.LightGreen)
    assert green.t_ms - red.t_ms < 3000


def test_nonmonotonic_timestamp():
    session = GuidanceSession()
    session.feed(FrameObservation(100, RED, CENTERED))
    with pytest.raises(SessionError):
        session.feed(FrameObservation(100, RED, CENTERED))


def test_observation_validation():
    with pytest.raises(ValidationError):
        FrameObservation(0, (0.5, 0.5, 0.5, 0, 0), CENTERED)
    with pytest.raises(ValidationError):
        FrameObservation(0, RED, (0.5, 0.5, 0.5))
    with pytest.raises(ValidationError):
        FrameObservation(0, RED, (0.5, float("nan"), 0.5, 0.5))


def test_stage_progression_and_regression():
    cfg = GuidanceConfig()
    state = GuidanceState()
    state, ev = step(state, FrameObservation(0, RED, (0.2, 0.95, 0.2, 0.3)), cfg)
    assert state.stage == Stage.Positioning and [e.kind for e in ev] == [Kind.MoveRight]
    state, ev = step(state, FrameObservation(61, RED, _coords_at_angle(30)), cfg)
    assert state.stage == Stage.Orienting
    assert [e.kind for e in ev] == [Kind.PositionOk, Kind.RotateRight]
    state, ev = step(state, FrameObservation(122, RED, CENTERED), cfg)
    assert state.stage == Stage.Monitoring and [e.kind for e in ev] == [Kind.OrientationOk]
    state, ev = step(state, FrameObservation(183, RED, _coords_at_angle(-30)), cfg)
    assert state.stage == Stage.Orienting and [e.kind for e in ev] == [Kind.RotateLeft]
    state, ev = step(state, FrameObservation(244, RED, (0.9, 0.95, 0.9, 0.3)), cfg)
    assert state.stage == Stage.Positioning and [e.kind for e in ev] == [Kind.MoveLeft]


def test_instruction_flip_is_immediate():
    cfg = GuidanceConfig()
    frames = [
        FrameObservation(0, NONE, (0.2, 0.95, 0.2, 0.3)),
        FrameObservation(61, NONE, (0.8, 0.95, 0.8, 0.3)),
        FrameObservation(122, NONE, (0.8, 0.95, 0.8, 0.3)),
    ]
    kinds = [(e.t_ms, e.kind) for e in replay(frames, cfg)]
    assert kinds == [(0, Kind.MoveRight), (61, Kind.MoveLeft)]


def test_position_uses_ground_plane():
    # a homography shifting ground x by +200 px turns a centred start into MoveLeft
    h = Homography([[1, 0, 200], [0, 1, 0], [0, 0, 1]])
    events = replay([FrameObservation(0, NONE, CENTERED)], GuidanceConfig(homography=h))
    assert [e.kind for e in events] == [Kind.MoveLeft]


def test_coords_clamped():
    events = replay([FrameObservation(0, NONE, (-0.5, 1.4, -0.5, 0.3))])
    assert [e.kind for e in events] == [Kind.MoveRight]


def test_config_from_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "homography": [1, 0, 0, 0, 1, 0, 0, 0, 1], "position_band": 0.1, "angle_band_deg": 5,
        "confidence_threshold": 0.9, "window": 3, "renotify_ms": 1000, "light_repeat_ms": 500,
    }))
    cfg = GuidanceConfig.load(path)
    assert cfg.window == 3 and cfg.renotify_ms == 1000
    np.testing.assert_array_equal(cfg.homography.matrix, np.eye(3))
    with pytest.raises(ConfigurationError):
        GuidanceConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigurationError):
        GuidanceConfig.from_dict({"window": 0})


def check_log_invariants(frames, events, cfg=GuidanceConfig()):
    """Global invariants of any event log, checked independently of step()."""
    last = {}
    for e in events:
        gap = {Kind.MoveLeft: cfg.renotify_ms, Kind.MoveRight: cfg.renotify_ms,
               Kind.RotateLeft: cfg.renotify_ms, Kind.RotateRight: cfg.renotify_ms}.get(e.kind)
        if e.kind.value.startswith("Light"):
            gap = cfg.light_repeat_ms
        if gap is not None and e.kind in last:
            assert e.t_ms - last[e.kind] >= gap, (e, last[e.kind])
        last[e.kind] = e.t_ms

    seen = set()
    for e in events:
        if e.kind.value.startswith("Light"):
            assert {Kind.PositionOk, Kind.OrientationOk} <= seen
        seen.add(e.kind)

    index = {f.t_ms: i for i, f in enumerate(frames)}
    merged = {"LightRed": [0], "LightGreen": [1], "LightCountdown": [2, 3], "LightNone": [4]}
    for e in events:
        if not e.kind.value.startswith("Light"):
            continue
        i = index[e.t_ms]
        assert i + 1 >= cfg.window
        win = frames[i + 1 - cfg.window : i + 1]
        mass = sum(sum(f.probs[c] for c in merged[e.kind.value]) for f in win) / cfg.window
        assert mass >= cfg.confidence_threshold - 1e-12


@pytest.mark.parametrize("seed", range(200))
def test_fuzzed_log_invariants(seed):
    frames = random_stream(seed)
    events = replay(frames)
    check_log_invariants(frames, events)
    assert format_event_log(replay(frames)) == format_event_log(events)
