"""Controlled-input scripts: one input dimension swept per segment, everything else held."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .FieldSemanticsMap import BODY_PARTS, HANDS, KEYBOARD_OPEN, POSITION_AXES, position_channel, trigger_channel
from .MotionScript import MotionSample, MotionScript, Segment
from .MotionUpdate import EVENT_KEYBOARD_OPEN
from .Transform import Transform, UnitQuat, Vec3

QUAT_AXES = ("x", "y", "z")
SAMPLES_PER_STEP = 5
DEFAULT_BASE = MotionSample(
    head=Transform(Vec3(0.0, 1.6, 0.0), UnitQuat.identity()),
    left=Transform(Vec3(-0.18, 1.25, -0.15), UnitQuat.identity()),
    right=Transform(Vec3(0.18, 1.25, -0.15), UnitQuat.identity()),
)


def rotation_input(part: str, axis: str) -> str:
    """Input dimension that sweeps one vector component of a body part's quaternion."""
    return f"{part}.quat.{axis}"


@dataclass(frozen=True)
class Sweep:
    """Vary `dimension` linearly from start to stop over `steps` held values."""

    dimension: Optional[str]
    start: float = 0.0
    stop: float = 0.0
    steps: int = 1
    seconds: Optional[float] = None

    def values(self) -> list[float]:
        if self.dimension is None or self.dimension == KEYBOARD_OPEN:
            return [0.0]
        return [float(v) for v in np.linspace(self.start, self.stop, self.steps)]


def _with_value(base: MotionSample, dimension: str, value: float) -> MotionSample:
    part, _, rest = dimension.partition(".")
    if rest == "trigger":
        return replace(base, **{f"{part}_trigger": value})
    if part not in BODY_PARTS:
        raise ValueError(f"Unknown input dimension {dimension!r}")

    pose: Transform = getattr(base, part)
    kind, _, axis = rest.partition(".")
    if kind == "pos" and axis in POSITION_AXES:
        coords = dict(zip(POSITION_AXES, pose.position.as_tuple()))
        coords[axis] = value
        moved = Transform(Vec3(coords["x"], coords["y"], coords["z"]), pose.rotation)
    elif kind == "quat" and axis in QUAT_AXES:
        if abs(value) >= 1.0:
            raise ValueError(f"Quaternion component sweep value {value} must lie in (-1, 1)")
        components = {"x": 0.0, "y": 0.0, "z": 0.0, axis: value}
        w = math.sqrt(1.0 - value * value)
        moved = Transform(pose.position, UnitQuat(w, components["x"], components["y"], components["z"]))
    else:
        raise ValueError(f"Unknown input dimension {dimension!r}")
    return replace(base, **{part: moved})


def scripted_replay(
    sweeps: Sequence[Sweep],
    base: MotionSample = DEFAULT_BASE,
    user_id: int = 1,
    device_rate: float = 72.0,
    samples_per_step: int = SAMPLES_PER_STEP,
) -> MotionScript:
    """Build an isolation script; each sweep becomes one annotated segment."""
    samples: list[MotionSample] = []
    segments: list[Segment] = []
    for sweep in sweeps:
        start = len(samples)
        per_sample: list[float] = []
        if sweep.dimension is None or sweep.dimension == KEYBOARD_OPEN:
            n = max(1, int(round((sweep.seconds or 1.0) * device_rate)))
            for i in range(n):
                opens = sweep.dimension == KEYBOARD_OPEN and i == 0
                samples.append(replace(base, events=(EVENT_KEYBOARD_OPEN,) if opens else ()))
                per_sample.append(0.0)
        else:
            for value in sweep.values():
                sample = _with_value(base, sweep.dimension, value)
                samples += [sample] * samples_per_step
                per_sample += [value] * samples_per_step
        segments.append(Segment(sweep.dimension, start, len(samples), tuple(per_sample)))

    return MotionScript(user_id=user_id, device_rate=device_rate, samples=samples, segments=segments)


def default_isolation_sweeps(base: MotionSample = DEFAULT_BASE, steps: int = 200) -> list[Sweep]:
    """Every motion dimension once, the triggers over their exact 8-bit grid, and a keyboard-open."""
    sweeps: list[Sweep] = [Sweep(None, seconds=1.0)]
    for part in BODY_PARTS:
        pose: Transform = getattr(base, part)
        for axis, centre in zip(POSITION_AXES, pose.position.as_tuple()):
            sweeps.append(Sweep(position_channel(part, axis), centre - 0.5, centre + 0.5, steps))
        for axis in QUAT_AXES:
            sweeps.append(Sweep(rotation_input(part, axis), -0.5, 0.5, steps))
    for hand in HANDS:
        sweeps.append(Sweep(trigger_channel(hand), 0.0, 1.0, 256))
    sweeps.append(Sweep(KEYBOARD_OPEN, seconds=2.0))
    sweeps.append(Sweep(None, seconds=1.0))
    return sweeps
