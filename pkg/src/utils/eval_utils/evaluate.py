from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import pandas as pd
from rapidfuzz.distance import Levenshtein

from ...classes.KeyboardModel import KEY_COUNT, label_to_char
from ...classes.KeystrokeAttack import KeystrokeReport
from ...classes.MotionScript import TruthLabels
from ..errors import LengthMismatch
from ..logger import setup_logger
from .align_clicks import align_clicks
from .top_k import TOP_KS, random_baseline, top_k_hit

logger = setup_logger(__name__)

GROUPINGS = ("overall", "row", "speed_percentile", "hand", "prompt_kind", "user_id")


def speed_percentile_labels(n_bins: int = 5) -> list[str]:
    step = 100 // n_bins
    return [f"{i * step}-{(i + 1) * step}" for i in range(n_bins)]


@dataclass
class EvaluationResult:
    clicks: pd.DataFrame
    metrics: pd.DataFrame
    prompts: pd.DataFrame
    summary: dict[str, Any] = field(default_factory=lambda: {})

    def accuracy(self, k: int, grouping: str = "overall", group: Any = "all") -> float:
        rows = self.metrics[(self.metrics["grouping"] == grouping) & (self.metrics["group"] == str(group))]
        if rows.empty:
            raise KeyError(f"No {grouping}={group} row in metrics")
        return float(rows.iloc[0][f"top{k}"])

    def write_csv(self, path: str | Path) -> None:
        self.metrics.to_csv(path, index=False, float_format="%.6f")
        logger.info("Wrote %s metric rows to %s", len(self.metrics), path)

    def write_clicks_csv(self, path: str | Path) -> None:
        self.clicks.to_csv(path, index=False, float_format="%.6f")


def _click_rows(report: KeystrokeReport, truths: Mapping[int, TruthLabels], by_interval: bool) -> list[dict[str, Any]]:
    rows: list[dict[str, Any]] = []
    for uid, truth in sorted(truths.items()):
        clicks = report.users.get(uid, [])
        for label, click in zip(truth.labels, align_clicks(clicks, truth, by_interval)):
            ranking = [] if click is None else [r.label for r in click.ranking]
            row: dict[str, Any] = {
                "user_id": uid,
                "click_index": label.click_index,
                "key": label.key,
                "hand": str(label.hand),
                "row": label.row,
                "duration": label.duration,
                "prompt_index": label.prompt_index,
                "prompt_kind": label.prompt_kind,
                "detected": click is not None,
                "predicted": ranking[0] if ranking else "",
            }
            for k in TOP_KS:
                row[f"top{k}"] = top_k_hit(ranking, label.key, k)
            rows.append(row)

    extra = sorted(set(report.users) - set(truths))
    if extra:
        raise LengthMismatch(f"Report has users {extra} with no ground-truth labels")
    return rows


def _grouped(df: pd.DataFrame, grouping: str) -> pd.DataFrame:
    columns = [f"top{k}" for k in TOP_KS]
    if grouping == "overall":
        table = df[columns].mean().to_frame().T
        table.insert(0, "group", "all")
        table.insert(1, "clicks", len(df))
    else:
        grouped = df.groupby(grouping, sort=True, observed=True)
        table = grouped[columns].mean().reset_index().rename(columns={grouping: "group"})
        table.insert(1, "clicks", grouped.size().to_numpy())
    table["group"] = table["group"].astype(str)
    table.insert(0, "grouping", grouping)
    return table


def _prompt_similarity(df: pd.DataFrame) -> pd.DataFrame:
    rows: list[dict[str, Any]] = []
    for (uid, prompt_index), group in df.groupby(["user_id", "prompt_index"], sort=True):
        typed = "".join(label_to_char(k) for k in group["key"])
        predicted = "".join(label_to_char(p) for p in group["predicted"] if p)
        rows.append(
            {
                "user_id": uid,
                "prompt_index": prompt_index,
                "prompt_kind": group["prompt_kind"].iloc[0],
                "typed": typed,
                "predicted": predicted,
                "similarity": Levenshtein.normalized_similarity(typed, predicted),
            }
        )
    return pd.DataFrame(rows, columns=["user_id", "prompt_index", "prompt_kind", "typed", "predicted", "similarity"])


def evaluate(
    report: KeystrokeReport,
    truths: Mapping[int, TruthLabels],
    by_interval: bool = True,
) -> EvaluationResult:
    """Top-k accuracy overall and per row, speed percentile, hand, prompt kind and user.

    Undetected keystrokes count as wrong at every k.
    """
    rows = _click_rows(report, truths, by_interval)
    df = pd.DataFrame(rows)
    if df.empty:
        raise LengthMismatch("No labelled keystrokes to evaluate")

    labels = speed_percentile_labels()
    if df["duration"].nunique() >= len(labels):
        df["speed_percentile"] = pd.qcut(df["duration"].rank(method="first"), len(labels), labels=labels)
    else:
        df["speed_percentile"] = labels[0]

    metrics = pd.concat([_grouped(df, g) for g in GROUPINGS], ignore_index=True)
    prompts = _prompt_similarity(df)
    undetected = int((~df["detected"]).sum())
    summary: dict[str, Any] = {
        "clicks": len(df),
        "undetected": undetected,
        "mean_similarity": float(prompts["similarity"].mean()) if not prompts.empty else 0.0,
    }
    for k in TOP_KS:
        summary[f"top{k}"] = float(df[f"top{k}"].mean())
        summary[f"random_top{k}"] = random_baseline(k, KEY_COUNT)
    logger.info(
        "Evaluated %s keystrokes: top-1 %.4f, top-3 %.4f, top-5 %.4f, %s undetected",
        len(df),
        summary["top1"],
        summary["top3"],
        summary["top5"],
        undetected,
    )
    return EvaluationResult(clicks=df, metrics=metrics, prompts=prompts, summary=summary)
