"""Synthetic victims: hand paths toward target keys, trigger presses and keyboard-open events."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..utils.errors import NoConvergence
from ..utils.logger import setup_logger, should_log_progress
from ..utils.prompt_utils import Prompt
from .CursorOffset import CursorOffset
from .KeyboardModel import KeyboardModel, label_to_char, player_pose
from .MotionScript import ClickLabel, MotionSample, MotionScript
from .MotionUpdate import EVENT_KEYBOARD_OPEN, Hand
from .Transform import FORWARD, RIGHT, UP, Transform, UnitQuat, Vec3

logger = setup_logger(__name__)

DEVICE_RATE = 72.0
TRIGGER_THRESHOLD = 0.75

# Press duration brackets (s) for the 0-20 ... 80-100 percentile speed groups
DURATION_QUINTILES: dict[int, tuple[float, float]] = {
    0: (0.255, 0.721),
    1: (0.721, 0.85),
    2: (0.85, 0.98),
    3: (0.98, 1.15),
    4: (1.15, 1.5),
}

RISE_FRACTION = 0.3
HOLD_FRACTION = 0.4
AIM_CLIP = 0.010
HAND_REACH = 0.4
REST_OFFSETS = {Hand.LEFT: Vec3(-0.18, -0.35, -0.15), Hand.RIGHT: Vec3(0.18, -0.35, -0.15)}
DEFAULT_CURSOR_OFFSET = CursorOffset.from_yaw(7.0, 0.02, -0.01, 0.11)


@dataclass(frozen=True)
class TypistProfile:
    speed_quintile: int = 0
    aim_sigma: float = 0.004
    miss_prob: float = 0.0
    right_hand_fraction: float = 0.7
    threshold: float = TRIGGER_THRESHOLD
    head_position: Vec3 = field(default_factory=lambda: Vec3(0.0, 1.6, 0.0))
    head_yaw_deg: float = 0.0
    head_pitch_deg: float = -20.0
    prompt_drift: float = 0.02
    prompt_yaw_drift_deg: float = 3.0

    def __post_init__(self) -> None:
        if self.speed_quintile not in DURATION_QUINTILES:
            raise ValueError(f"speed_quintile must be in 0..4, got {self.speed_quintile}")
        for name in ("miss_prob", "right_hand_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if not 0.05 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0.05, 1), got {self.threshold}")

    @property
    def duration_range(self) -> tuple[float, float]:
        return DURATION_QUINTILES[self.speed_quintile]


def minimum_jerk(s: float) -> float:
    return 10 * s**3 - 15 * s**4 + 6 * s**5


def trigger_profile(t: float, duration: float) -> float:
    """Linear rise over 30% of the press, full hold for 40%, linear release."""
    rise = RISE_FRACTION * duration
    fall_start = (RISE_FRACTION + HOLD_FRACTION) * duration
    if t < rise:
        value = t / rise
    elif t < fall_start:
        value = 1.0
    else:
        value = (duration - t) / (duration - fall_start)
    return min(1.0, max(0.0, value))


def aim_hand(position: Vec3, target: Vec3, offset: CursorOffset, iterations: int = 100, tol: float = 1e-12) -> Transform:
    """Hand rotation at `position` whose cursor ray passes through `target`."""
    local_forward = offset.transform.rotation.rotate(FORWARD)
    rotation = UnitQuat.from_two_vectors(local_forward, target - position)
    for _ in range(iterations):
        origin = position + rotation.rotate(offset.transform.position)
        updated = UnitQuat.from_two_vectors(local_forward, target - origin)
        if np.max(np.abs(updated.as_array() - rotation.as_array())) < tol:
            return Transform(position, updated)
        rotation = updated
    raise NoConvergence(f"Hand aim at {target.as_tuple()} did not settle in {iterations} iterations")


class _ScriptBuilder:
    def __init__(self, offset: CursorOffset, profile: TypistProfile) -> None:
        self.offset = offset
        self.profile = profile
        self.samples: list[MotionSample] = []
        self.labels: list[ClickLabel] = []
        self.head = Transform.identity()
        self.hands: dict[Hand, Transform] = {}

    def emit(self, left_trigger: float = 0.0, right_trigger: float = 0.0, events: tuple[int, ...] = ()) -> int:
        self.samples.append(
            MotionSample(
                head=self.head,
                left=self.hands[Hand.LEFT],
                right=self.hands[Hand.RIGHT],
                left_trigger=left_trigger,
                right_trigger=right_trigger,
                events=events,
            )
        )
        return len(self.samples) - 1

    def hold(self, seconds: float) -> None:
        for _ in range(max(1, int(round(seconds * DEVICE_RATE)))):
            self.emit()

    def move(self, hand: Hand, goal: Transform, seconds: float) -> None:
        start = self.hands[hand]
        n = max(2, int(round(seconds * DEVICE_RATE)))
        for i in range(1, n + 1):
            s = minimum_jerk(i / n)
            self.hands[hand] = Transform(
                start.position + (goal.position - start.position) * s,
                start.rotation.slerp(goal.rotation, s),
            )
            self.emit()

    def press(self, hand: Hand, duration: float) -> tuple[int, int, int]:
        """Returns (start, click, end) sample indices."""
        n = max(3, int(round(duration * DEVICE_RATE)))
        start = len(self.samples)
        click: Optional[int] = None
        for i in range(n):
            value = trigger_profile(i / DEVICE_RATE, duration)
            left, right = (value, 0.0) if hand == Hand.LEFT else (0.0, value)
            index = self.emit(left, right)
            if click is None and value >= self.profile.threshold:
                click = index
        end = self.emit()
        if click is None:
            raise ValueError(f"Press of {duration:.3f} s never reached threshold {self.profile.threshold}")
        return start, click, end


def _head_for_prompt(profile: TypistProfile, rng: np.random.Generator) -> Transform:
    drift = rng.normal(0.0, profile.prompt_drift, size=3) * np.array([1.0, 0.25, 1.0])
    yaw = math.radians(profile.head_yaw_deg + rng.normal(0.0, profile.prompt_yaw_drift_deg))
    rotation = UnitQuat.from_axis_angle(UP, yaw) * UnitQuat.from_axis_angle(RIGHT, math.radians(profile.head_pitch_deg))
    return Transform(profile.head_position + Vec3.from_array(drift), rotation.normalized())


def _aim_offset(profile: TypistProfile, rng: np.random.Generator) -> tuple[float, float]:
    if profile.miss_prob and rng.random() < profile.miss_prob:
        outside = 0.015 + float(rng.uniform(0.001, 0.005))
        axis = int(rng.integers(2))
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return (sign * outside, 0.0) if axis == 0 else (0.0, sign * outside)
    dx, dy = np.clip(rng.normal(0.0, profile.aim_sigma, size=2), -AIM_CLIP, AIM_CLIP)
    return float(dx), float(dy)


def synthesize_session(
    prompts: Sequence[Prompt],
    kb: KeyboardModel,
    profile: TypistProfile,
    seed: int,
    offset: CursorOffset = DEFAULT_CURSOR_OFFSET,
    user_id: int = 1,
) -> MotionScript:
    """One continuous script typing every prompt in order, reopening the keyboard per prompt."""
    for prompt in prompts:
        kb.check_text(prompt.text)

    rng = np.random.default_rng(seed)
    builder = _ScriptBuilder(offset, profile)
    lo, hi = profile.duration_range

    for p_index, prompt in enumerate(prompts):
        builder.head = _head_for_prompt(profile, rng)
        placed = kb.place(builder.head)
        body = player_pose(builder.head)
        rest = {h: Transform(body.apply(REST_OFFSETS[h]), body.rotation) for h in Hand}
        if not builder.hands:
            builder.hands = dict(rest)
        else:
            for h in Hand:
                builder.move(h, rest[h], 0.3)

        builder.emit(events=(EVENT_KEYBOARD_OPEN,))
        builder.hold(0.4)

        for ch in prompt.text:
            key = kb.key_for_char(ch)
            hand = Hand.RIGHT if rng.random() < profile.right_hand_fraction else Hand.LEFT
            duration = float(rng.uniform(lo, hi))
            dx, dy = _aim_offset(profile, rng)

            local = key.center + Vec3(dx, dy, 0.0)
            target = placed.pose.apply(local)
            rest_pos = rest[hand].position
            aim = aim_hand(rest_pos + (target - rest_pos) * HAND_REACH, target, offset)

            builder.move(hand, aim, min(0.6, max(0.15, 0.6 * duration)))
            start, click, end = builder.press(hand, duration)
            builder.labels.append(
                ClickLabel(
                    click_index=click,
                    key=key.label,
                    hand=hand,
                    start_index=start,
                    end_index=end,
                    duration=duration,
                    row=key.row,
                    prompt_index=p_index,
                    prompt_kind=prompt.kind,
                )
            )

        builder.hold(0.3)
        if should_log_progress(p_index + 1, len(prompts)):
            logger.info("Synthesized prompt %s/%s (%s clicks so far)", p_index + 1, len(prompts), len(builder.labels))

    if not prompts:
        builder.head = _head_for_prompt(profile, rng)
        body = player_pose(builder.head)
        builder.hands = {h: Transform(body.apply(REST_OFFSETS[h]), body.rotation) for h in Hand}
        builder.emit(events=(EVENT_KEYBOARD_OPEN,))
        builder.hold(0.4)

    return MotionScript(
        user_id=user_id,
        device_rate=DEVICE_RATE,
        samples=builder.samples,
        labels=builder.labels,
        prompts=[p.text for p in prompts],
    )


def synthesize_typing(
    prompt: Prompt,
    kb: KeyboardModel,
    profile: TypistProfile,
    seed: int,
    offset: CursorOffset = DEFAULT_CURSOR_OFFSET,
    user_id: int = 1,
) -> MotionScript:
    return synthesize_session([prompt], kb, profile, seed, offset, user_id)


def replay_ground_truth(script: MotionScript, kb: KeyboardModel, offset: CursorOffset) -> str:
    """Ray-cast every labelled click sample with the true geometry and return the top-1 text."""
    opened_at: Optional[int] = None
    open_indices = [i for i, s in enumerate(script.samples) if s.opens_keyboard]
    typed: list[str] = []
    for label in script.labels:
        for i in open_indices:
            if i <= label.click_index:
                opened_at = i
        if opened_at is None:
            raise ValueError(f"Click at sample {label.click_index} precedes any keyboard-open")
        placed = kb.place(script.samples[opened_at].head)
        sample = script.samples[label.click_index]
        ranking = placed.rank(offset.ray(sample.hand(label.hand)))
        typed.append(label_to_char(ranking[0].label) if ranking else "")
    return "".join(typed)
