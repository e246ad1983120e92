from typing import Optional, Sequence

from ...classes.KeystrokeAttack import ClickRecord
from ...classes.MotionScript import TruthLabels
from ..errors import LengthMismatch


def press_interval(start_index: int, end_index: int, device_rate: float) -> tuple[float, float]:
    """Seconds during which a press is held; the last sample stays current for one device frame."""
    return start_index / device_rate, (end_index + 1) / device_rate


def align_clicks(
    clicks: Sequence[ClickRecord],
    truth: TruthLabels,
    by_interval: bool = True,
) -> list[Optional[ClickRecord]]:
    """Pair each labelled keystroke with the detected click that belongs to it, or None if it went undetected.

    By interval, a click matches the first unmatched label of the same hand whose
    press interval contains the click time. By order, counts must agree exactly.
    """
    if len(clicks) > len(truth.labels):
        raise LengthMismatch(
            f"User {truth.user_id}: {len(clicks)} detected clicks but only {len(truth.labels)} labelled keystrokes"
        )
    if not by_interval:
        if len(clicks) != len(truth.labels):
            raise LengthMismatch(
                f"User {truth.user_id}: {len(clicks)} clicks cannot be aligned by order to {len(truth.labels)} labels"
            )
        return list(clicks)

    matched: list[Optional[ClickRecord]] = [None] * len(truth.labels)
    unmatched: list[ClickRecord] = []
    for click in sorted(clicks, key=lambda c: (c.time, c.sequence)):
        for i, label in enumerate(truth.labels):
            if matched[i] is not None or label.hand != click.hand:
                continue
            lo, hi = press_interval(label.start_index, label.end_index, truth.device_rate)
            if lo <= click.time < hi:
                matched[i] = click
                break
        else:
            unmatched.append(click)
    if unmatched:
        raise LengthMismatch(
            f"User {truth.user_id}: {len(unmatched)} clicks fall outside every labelled press "
            f"(first at tick {unmatched[0].tick})"
        )
    return matched
