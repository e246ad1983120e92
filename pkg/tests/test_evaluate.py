from pathlib import Path

import pandas as pd
import pytest

from src.classes.KeyboardModel import RankedKey
from src.classes.KeystrokeAttack import ClickRecord, KeystrokeReport
from src.classes.MotionScript import ClickLabel, TruthLabels
from src.classes.MotionUpdate import Hand
from src.classes.Transform import Transform
from src.utils.errors import LengthMismatch
from src.utils.eval_utils import align_clicks, evaluate, press_interval, random_baseline, top_k_hit

RATE = 72.0


def _label(start: int, key: str, hand: Hand = Hand.RIGHT, row: int = 3, duration: float = 0.5) -> ClickLabel:
    return ClickLabel(
        click_index=start + 5,
        key=key,
        hand=hand,
        start_index=start,
        end_index=start + 20,
        duration=duration,
        row=row,
        prompt_kind="password",
    )


def _click(sample: int, ranking: list[str], hand: Hand = Hand.RIGHT) -> ClickRecord:
    return ClickRecord(
        user_id=1,
        hand=hand,
        sequence=sample,
        tick=sample,
        time=sample / RATE,
        hand_transform=Transform.identity(),
        trigger=1.0,
        ranking=tuple(RankedKey(label, float(i)) for i, label in enumerate(ranking)),
    )


@pytest.fixture
def truth() -> TruthLabels:
    return TruthLabels(
        user_id=1,
        device_rate=RATE,
        labels=[_label(0, "q"), _label(40, "w", Hand.LEFT, duration=0.9), _label(80, "a", row=2, duration=1.2)],
        prompts=["qwa"],
    )


class TestTopK:
    def test_top_k_hit(self) -> None:
        assert top_k_hit(["a", "b", "c"], "b", 2)
        assert not top_k_hit(["a", "b", "c"], "c", 2)
        assert not top_k_hit([], "a", 5)

    def test_random_baseline(self) -> None:
        assert random_baseline(1) == pytest.approx(1 / 47)
        assert random_baseline(5) == pytest.approx(5 / 47)
        assert random_baseline(60) == 1.0


class TestAlign:
    def test_press_interval_covers_last_frame(self) -> None:
        assert press_interval(72, 143, RATE) == (1.0, 2.0)

    def test_matches_by_hand_and_interval(self, truth: TruthLabels) -> None:
        a = _click(85, ["a"])
        q = _click(10, ["q"])
        w = _click(45, ["w"], Hand.LEFT)
        assert align_clicks([a, w, q], truth) == [q, w, a]

    def test_missed_press_is_none(self, truth: TruthLabels) -> None:
        a = _click(85, ["a"])
        assert align_clicks([a], truth) == [None, None, a]

    def test_stray_click_rejected(self, truth: TruthLabels) -> None:
        with pytest.raises(LengthMismatch):
            align_clicks([_click(30, ["x"])], truth)

    def test_wrong_hand_rejected(self, truth: TruthLabels) -> None:
        with pytest.raises(LengthMismatch):
            align_clicks([_click(45, ["w"], Hand.RIGHT)], truth)

    def test_by_order_needs_equal_counts(self, truth: TruthLabels) -> None:
        with pytest.raises(LengthMismatch):
            align_clicks([_click(10, ["q"])], truth, by_interval=False)


class TestEvaluate:
    def test_two_of_three(self, truth: TruthLabels, tmp_path: Path) -> None:
        clicks = [_click(10, ["q", "w"]), _click(45, ["e", "w", "q"], Hand.LEFT), _click(85, ["a"])]
        result = evaluate(KeystrokeReport(users={1: clicks}), {1: truth})

        assert result.accuracy(1) == pytest.approx(2 / 3)
        assert result.accuracy(3) == 1.0
        assert result.accuracy(1, "hand", "left") == 0.0
        assert result.accuracy(1, "row", 2) == 1.0
        assert result.summary["random_top1"] == pytest.approx(1 / 47)

        prompts = result.prompts
        assert list(prompts["typed"]) == ["qwa"]
        assert list(prompts["predicted"]) == ["qea"]

        path = tmp_path / "metrics.csv"
        result.write_csv(path)
        written = pd.read_csv(path)
        assert set(written["grouping"]) == {"overall", "row", "speed_percentile", "hand", "prompt_kind", "user_id"}

    def test_undetected_count_as_wrong(self, truth: TruthLabels) -> None:
        result = evaluate(KeystrokeReport(users={1: []}), {1: truth})
        assert result.accuracy(1) == 0.0
        assert result.accuracy(5) == 0.0
        assert result.summary["undetected"] == 3

    def test_unknown_user_rejected(self, truth: TruthLabels) -> None:
        with pytest.raises(LengthMismatch):
            evaluate(KeystrokeReport(users={1: [], 2: []}), {1: truth})

    def test_missing_group(self, truth: TruthLabels) -> None:
        result = evaluate(KeystrokeReport(users={1: []}), {1: truth})
        with pytest.raises(KeyError):
            result.accuracy(1, "row", 9)
