"""Desk-scale manipulation simulators with hidden physical parameters.

Five tasks, each rendered as 8-frame 32x32 grayscale rollouts: two bar
tasks whose bars deflect when contacted off-center, a brick slid up a
slope with unknown friction, a box whose opening mode is hidden, and a
faucet whose turn direction is hidden.  The hidden parameter never
appears in the reset observation; it only shapes execution outcomes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .core import Video

IMAGE_SIZE = 32
ROLLOUT_FRAMES = 8

BACKGROUND_SHADE = 0.0
TARGET_SHADE = 0.3
OBJECT_SHADE = 0.6
GRIPPER_SHADE = 1.0

# Intensity bands the tracker reads; binary-drawn bodies land exactly inside.
GRIPPER_BAND = (0.95, 1.0)
OBJECT_BAND = (0.55, 0.65)


class EnvKind(Enum):
    PUSH_BAR = "pushbar"
    PICK_BAR = "pickbar"
    SLIDE_BRICK = "slidebrick"
    OPEN_BOX = "openbox"
    TURN_FAUCET = "turnfaucet"


# Hidden-parameter tables.  The bar offsets are a deliberately irregular
# 24-value grid (note -0.05 without -0.045, and no +0.165).
BAR_OFFSETS: tuple[float, ...] = (
    -0.18, -0.165, -0.15, -0.135, -0.12, -0.105, -0.09, -0.075,
    -0.06, -0.05, -0.03, -0.015, 0.0, 0.015, 0.03, 0.045,
    0.06, 0.075, 0.09, 0.105, 0.12, 0.135, 0.15, 0.18,
)
BRICK_FRICTIONS: tuple[float, ...] = (
    0.24, 0.25, 0.26, 0.27, 0.28, 0.30, 0.32, 0.34, 0.35, 0.36, 0.38, 0.39, 0.40,
)
BOX_MODES: tuple[str, ...] = ("lift", "slide")
FAUCET_MODES: tuple[str, ...] = ("cw", "ccw")

# Bar geometry and physics.
BAR_LENGTH_M = 0.4
PX_PER_M = 60.0
CENTER_COL = 16.0
BAR_HALF_PX = 0.5 * BAR_LENGTH_M * PX_PER_M  # 12 px
BAR_START_ROW = 24.0
BAR_TARGET_ROW = 5.0
BAR_ACTION_RANGE = (-0.2, 0.2)
DEFLECTION_GAIN = 5.0          # rad per metre of contact offset error
BAR_SUCCESS_ANGLE = 0.15       # rad; equals a 0.03 m offset tolerance
BAR_SUCCESS_OFFSET = 0.03
CONTACT_FRAME = 2

# Brick geometry and friction model.
BRICK_MU0 = 0.32
BRICK_STOP_BAND = (0.95, 1.05)
RISE_COL = 3.0
RISE_BASE_ROW = 29.0
RISE_SCALE_PX = 26.0           # push_height 0..1 spans 26 rows
TRACK_ROW = 26.0
TRACK_BASE_COL = 2.0
TRACK_SCALE_PX = 14.0          # stop position 0..2 spans 28 cols

# Box and faucet geometry.
LID_ROWS = (13, 14)
LID_COLS = (9, 23)
BOX_BODY = (16, 22, 10, 22)    # row0, row1, col0, col1
LID_LIFT_PX = 8.0
LID_SLIDE_PX = 12.0
STUCK_PX = 2.0
HANDLE_HOME = (16.0, 24.0)
FAUCET_BASE = (14, 18, 14, 18)
HANDLE_CW_PX = 8.0             # vertical travel marks a clockwise turn
HANDLE_CCW_PX = 16.0           # horizontal travel marks a counter-clockwise turn

_EPS = 1e-9


def hidden_values(kind: EnvKind) -> tuple[float | str, ...]:
    """The hidden-parameter table for a task kind."""
    if kind in (EnvKind.PUSH_BAR, EnvKind.PICK_BAR):
        return BAR_OFFSETS
    if kind is EnvKind.SLIDE_BRICK:
        return BRICK_FRICTIONS
    if kind is EnvKind.OPEN_BOX:
        return BOX_MODES
    if kind is EnvKind.TURN_FAUCET:
        return FAUCET_MODES
    raise ValueError(f"unknown kind {kind}")


def object_id(kind: EnvKind, theta: float | str) -> str:
    """Canonical object identifier "<kind>/<theta>"."""
    if isinstance(theta, str):
        return f"{kind.value}/{theta}"
    return f"{kind.value}/{theta:g}"


def _check_theta(kind: EnvKind, theta: float | str) -> float | str:
    if kind in (EnvKind.OPEN_BOX, EnvKind.TURN_FAUCET):
        if theta not in hidden_values(kind):
            raise ValueError(f"invalid mode {theta!r} for {kind.value}")
        return theta
    value = float(theta)
    if not math.isfinite(value):
        raise ValueError("theta must be finite")
    if kind in (EnvKind.PUSH_BAR, EnvKind.PICK_BAR) and abs(value) > 0.2:
        raise ValueError(f"bar offset theta {value} outside [-0.2, 0.2]")
    if kind is EnvKind.SLIDE_BRICK and not (0.05 <= value <= 1.0):
        raise ValueError(f"friction theta {value} out of range")
    return value


@dataclass(frozen=True)
class HiddenParam:
    kind: EnvKind
    value: float | str

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", _check_theta(self.kind, self.value))


@dataclass(frozen=True)
class EnvAction:
    kind: EnvKind
    value: float | str

    def __post_init__(self) -> None:
        kind, value = self.kind, self.value
        if kind in (EnvKind.PUSH_BAR, EnvKind.PICK_BAR):
            value = float(value)
            lo, hi = BAR_ACTION_RANGE
            if not (lo - _EPS <= value <= hi + _EPS):
                raise ValueError(f"contact offset {value} outside {BAR_ACTION_RANGE}")
        elif kind is EnvKind.SLIDE_BRICK:
            value = float(value)
            if not (-_EPS <= value <= 1.0 + _EPS):
                raise ValueError(f"push height {value} outside [0, 1]")
        elif kind is EnvKind.OPEN_BOX:
            if value not in BOX_MODES:
                raise ValueError(f"invalid box mode {value!r}")
        elif kind is EnvKind.TURN_FAUCET:
            if value not in FAUCET_MODES:
                raise ValueError(f"invalid faucet mode {value!r}")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True)
class EnvInstance:
    kind: EnvKind
    theta: HiddenParam

    def __post_init__(self) -> None:
        if self.theta.kind is not self.kind:
            raise ValueError("hidden parameter kind does not match environment kind")

    @classmethod
    def create(cls, kind: EnvKind, theta: float | str) -> "EnvInstance":
        return cls(kind, HiddenParam(kind, theta))

    @property
    def theta_value(self) -> float | str:
        return self.theta.value

    @property
    def object_id(self) -> str:
        return object_id(self.kind, self.theta.value)


@dataclass(frozen=True)
class ExecutionOutcome:
    video: Video
    success: bool


def sample_hidden(kind: EnvKind, rng: np.random.Generator) -> HiddenParam:
    """Draw a hidden parameter uniformly from the task's table."""
    table = hidden_values(kind)
    return HiddenParam(kind, table[int(rng.integers(len(table)))])


def bar_deflection(contact_offset: float, theta: float) -> float:
    """Deflection angle (rad) when contacting a bar off its balance point."""
    return DEFLECTION_GAIN * (contact_offset - theta)


def brick_stop_position(push_height: float, theta: float) -> float:
    """Slope coordinate where the brick settles, clamped to [0, 2]."""
    return float(np.clip(push_height * (1.0 + BRICK_MU0 / theta), 0.0, 2.0))


# ---------------------------------------------------------------------------
# Rendering


@dataclass(frozen=True)
class SceneState:
    """Poses of the movable bodies; ``None`` omits a body from the frame."""

    gripper: tuple[float, float] | None = None      # (row, col) centre
    bar: tuple[float, float, float] | None = None   # (row, col, angle rad)
    brick: tuple[float, float] | None = None        # (row, col) centre
    lid_offset: tuple[float, float] | None = None   # (drow, dcol) from rest
    handle_offset: tuple[float, float] | None = None


_ROWS, _COLS = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE]


def _ri(x: float) -> int:
    return int(np.round(x))


def _paint_block(canvas: np.ndarray, row: float, col: float, half: int, shade: float) -> None:
    # Binary block on rounded pixel centres, clipped to the canvas.
    r, c = _ri(row), _ri(col)
    r0, r1 = max(r - half, 0), min(r + half, IMAGE_SIZE - 1)
    c0, c1 = max(c - half, 0), min(c + half, IMAGE_SIZE - 1)
    if r0 > r1 or c0 > c1:
        return
    region = canvas[r0 : r1 + 1, c0 : c1 + 1]
    np.maximum(region, shade, out=region)


def _paint_rect(canvas: np.ndarray, r0: int, r1: int, c0: int, c1: int, shade: float) -> None:
    r0, r1 = max(r0, 0), min(r1, IMAGE_SIZE - 1)
    c0, c1 = max(c0, 0), min(c1, IMAGE_SIZE - 1)
    if r0 > r1 or c0 > c1:
        return
    region = canvas[r0 : r1 + 1, c0 : c1 + 1]
    np.maximum(region, shade, out=region)


def _paint_capsule(
    canvas: np.ndarray,
    p0: tuple[float, float],
    p1: tuple[float, float],
    half_width: float,
    shade: float,
) -> None:
    # Anti-aliased capsule: per-pixel coverage from distance to the segment,
    # so sub-pixel pose changes alter the frame continuously.
    r0, c0 = p0
    r1, c1 = p1
    dr, dc = r1 - r0, c1 - c0
    norm2 = dr * dr + dc * dc
    pr = _ROWS - r0
    pc = _COLS - c0
    if norm2 < 1e-12:
        dist = np.sqrt(pr * pr + pc * pc)
    else:
        t = np.clip((pr * dr + pc * dc) / norm2, 0.0, 1.0)
        qr = pr - t * dr
        qc = pc - t * dc
        dist = np.sqrt(qr * qr + qc * qc)
    coverage = np.clip(half_width + 0.5 - dist, 0.0, 1.0)
    np.maximum(canvas, shade * coverage, out=canvas)


def _scenery(kind: EnvKind) -> np.ndarray:
    canvas = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=np.float64)
    if kind in (EnvKind.PUSH_BAR, EnvKind.PICK_BAR):
        _paint_rect(canvas, 4, 6, 0, IMAGE_SIZE - 1, TARGET_SHADE)
    elif kind is EnvKind.SLIDE_BRICK:
        _paint_rect(canvas, 24, 28, 15, 17, TARGET_SHADE)
    elif kind is EnvKind.OPEN_BOX:
        _paint_rect(canvas, *BOX_BODY, TARGET_SHADE)
    elif kind is EnvKind.TURN_FAUCET:
        _paint_rect(canvas, *FAUCET_BASE, TARGET_SHADE)
    return canvas


def render(kind: EnvKind, state: SceneState) -> np.ndarray:
    """Raster a scene to a 32x32 float32 frame in [0, 1].

    Static scenery paints at 0.3, movable objects at 0.6, the gripper at
    1.0; overlaps keep the brightest value.  Deterministic.
    """
    canvas = _scenery(kind)
    if state.bar is not None:
        row, col, angle = state.bar
        dr = -BAR_HALF_PX * math.sin(angle)
        dc = BAR_HALF_PX * math.cos(angle)
        _paint_capsule(canvas, (row - dr, col - dc), (row + dr, col + dc), 1.1, OBJECT_SHADE)
    if state.brick is not None:
        _paint_capsule(canvas, state.brick, state.brick, 1.3, OBJECT_SHADE)
    if state.lid_offset is not None:
        drow, dcol = state.lid_offset
        _paint_rect(
            canvas,
            LID_ROWS[0] + _ri(drow),
            LID_ROWS[1] + _ri(drow),
            LID_COLS[0] + _ri(dcol),
            LID_COLS[1] + _ri(dcol),
            OBJECT_SHADE,
        )
    if state.handle_offset is not None:
        drow, dcol = state.handle_offset
        _paint_block(canvas, HANDLE_HOME[0] + drow, HANDLE_HOME[1] + dcol, 1, OBJECT_SHADE)
    if state.gripper is not None:
        _paint_block(canvas, state.gripper[0], state.gripper[1], 1, GRIPPER_SHADE)
    return canvas.astype(np.float32)


def _rest_state(kind: EnvKind) -> SceneState:
    if kind is EnvKind.PUSH_BAR:
        return SceneState(gripper=(29.0, 16.0), bar=(BAR_START_ROW, CENTER_COL, 0.0))
    if kind is EnvKind.PICK_BAR:
        return SceneState(gripper=(2.0, 16.0), bar=(BAR_START_ROW, CENTER_COL, 0.0))
    if kind is EnvKind.SLIDE_BRICK:
        return SceneState(gripper=(RISE_BASE_ROW, RISE_COL), brick=(TRACK_ROW, TRACK_BASE_COL))
    if kind is EnvKind.OPEN_BOX:
        return SceneState(gripper=(2.0, 16.0), lid_offset=(0.0, 0.0))
    if kind is EnvKind.TURN_FAUCET:
        return SceneState(gripper=(2.0, 24.0), handle_offset=(0.0, 0.0))
    raise ValueError(f"unknown kind {kind}")


def reset(env: EnvInstance) -> np.ndarray:
    """Initial observation; identical for every hidden parameter of a kind."""
    return render(env.kind, _rest_state(env.kind))


# ---------------------------------------------------------------------------
# Rollouts


def _bar_frames(kind: EnvKind, theta: float, offset: float) -> tuple[list[np.ndarray], bool]:
    phi = bar_deflection(offset, theta)
    success = abs(offset - theta) <= BAR_SUCCESS_OFFSET + _EPS
    draw_angle = 1.2 * math.tanh(phi / 1.2)
    reach = 1.0 / (1.0 + abs(phi))
    final_row = BAR_START_ROW + (BAR_TARGET_ROW - BAR_START_ROW) * reach
    contact_col = CENTER_COL + PX_PER_M * offset
    offset_px = PX_PER_M * offset
    grip_side = 3.0 if kind is EnvKind.PUSH_BAR else -3.0

    frames = [render(kind, _rest_state(kind))]
    if kind is EnvKind.PUSH_BAR:
        approach = [(28.0, contact_col), (27.0, contact_col)]
    else:
        approach = [(12.0, contact_col), (21.0, contact_col)]
    for grip in approach:
        frames.append(
            render(kind, SceneState(gripper=grip, bar=(BAR_START_ROW, CENTER_COL, 0.0)))
        )
    for t in range(3, ROLLOUT_FRAMES):
        u = (t - 2) / 5.0
        row = BAR_START_ROW + (final_row - BAR_START_ROW) * u
        angle = draw_angle * u
        contact_r = row - offset_px * math.sin(angle)
        contact_c = CENTER_COL + offset_px * math.cos(angle)
        frames.append(
            render(
                kind,
                SceneState(gripper=(contact_r + grip_side, contact_c), bar=(row, CENTER_COL, angle)),
            )
        )
    return frames, success


def _brick_frames(theta: float, push_height: float) -> tuple[list[np.ndarray], bool]:
    kind = EnvKind.SLIDE_BRICK
    s = brick_stop_position(push_height, theta)
    lo, hi = BRICK_STOP_BAND
    success = (lo - _EPS) <= s <= (hi + _EPS)
    frames = [render(kind, _rest_state(kind))]
    for step in (1, 2, 3):
        grow = RISE_BASE_ROW - RISE_SCALE_PX * push_height * (step / 3.0)
        frames.append(
            render(kind, SceneState(gripper=(grow, RISE_COL), brick=(grow - 3.0, RISE_COL)))
        )
    for t in range(4, ROLLOUT_FRAMES):
        v = (t - 3) / 4.0
        col = TRACK_BASE_COL + TRACK_SCALE_PX * s * v
        frames.append(
            render(kind, SceneState(gripper=(RISE_BASE_ROW, RISE_COL), brick=(TRACK_ROW, col)))
        )
    return frames, success


def _box_frames(theta: str, mode: str) -> tuple[list[np.ndarray], bool]:
    kind = EnvKind.OPEN_BOX
    success = mode == theta
    frames = [render(kind, _rest_state(kind))]
    for grow in (6.0, 10.0):
        frames.append(render(kind, SceneState(gripper=(grow, 16.0), lid_offset=(0.0, 0.0))))
    for t in range(3, ROLLOUT_FRAMES):
        u = (t - 2) / 5.0
        if mode == "lift":
            lid = (-LID_LIFT_PX * u, 0.0) if success else (-STUCK_PX, 0.0)
        else:
            lid = (0.0, LID_SLIDE_PX * u) if success else (0.0, STUCK_PX)
        frames.append(
            render(kind, SceneState(gripper=(10.0 + lid[0], 16.0 + lid[1]), lid_offset=lid))
        )
    return frames, success


def _faucet_frames(theta: str, mode: str) -> tuple[list[np.ndarray], bool]:
    kind = EnvKind.TURN_FAUCET
    success = mode == theta
    frames = [render(kind, _rest_state(kind))]
    for grow in (7.0, 12.0):
        frames.append(render(kind, SceneState(gripper=(grow, 24.0), handle_offset=(0.0, 0.0))))
    for t in range(3, ROLLOUT_FRAMES):
        u = (t - 2) / 5.0
        if mode == "cw":
            handle = (HANDLE_CW_PX * u, 0.0) if success else (STUCK_PX, 0.0)
        else:
            handle = (0.0, -HANDLE_CCW_PX * u) if success else (0.0, -STUCK_PX)
        frames.append(
            render(
                kind,
                SceneState(
                    gripper=(12.0 + handle[0], 24.0 + handle[1]), handle_offset=handle
                ),
            )
        )
    return frames, success


@lru_cache(maxsize=None)
def _execute_cached(kind: EnvKind, theta: float | str, value: float | str) -> ExecutionOutcome:
    if kind in (EnvKind.PUSH_BAR, EnvKind.PICK_BAR):
        frames, success = _bar_frames(kind, float(theta), float(value))
    elif kind is EnvKind.SLIDE_BRICK:
        frames, success = _brick_frames(float(theta), float(value))
    elif kind is EnvKind.OPEN_BOX:
        frames, success = _box_frames(str(theta), str(value))
    else:
        frames, success = _faucet_frames(str(theta), str(value))
    return ExecutionOutcome(video=Video(np.stack(frames)), success=success)


def execute(env: EnvInstance, action: EnvAction) -> ExecutionOutcome:
    """Deterministically roll out ``action`` under the hidden parameter.

    The returned video has 8 frames; frame 0 equals the reset observation.
    """
    if action.kind is not env.kind:
        raise ValueError("action kind does not match environment kind")
    return _execute_cached(env.kind, env.theta_value, action.value)


def scripted_action(env: EnvInstance) -> EnvAction:
    """Privileged ground-truth policy: succeeds for every table theta."""
    kind = env.kind
    theta = env.theta_value
    if kind in (EnvKind.PUSH_BAR, EnvKind.PICK_BAR):
        return EnvAction(kind, float(theta))
    if kind is EnvKind.SLIDE_BRICK:
        return EnvAction(kind, float(theta) / (float(theta) + BRICK_MU0))
    return EnvAction(kind, theta)


def all_instances(kind: EnvKind) -> list[EnvInstance]:
    """One environment instance per hidden-parameter table entry."""
    return [EnvInstance.create(kind, theta) for theta in hidden_values(kind)]
