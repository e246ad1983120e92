from .align_clicks import align_clicks, press_interval
from .evaluate import EvaluationResult, evaluate, speed_percentile_labels
from .top_k import TOP_KS, random_baseline, top_k_hit

__all__ = [
    "EvaluationResult",
    "TOP_KS",
    "align_clicks",
    "evaluate",
    "press_interval",
    "random_baseline",
    "speed_percentile_labels",
    "top_k_hit",
]
