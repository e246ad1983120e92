from typing import Sequence

TOP_KS = (1, 3, 5)


def top_k_hit(ranking: Sequence[str], truth: str, k: int) -> bool:
    return truth in ranking[:k]


def random_baseline(k: int, n_keys: int = 47) -> float:
    """Top-k accuracy of guessing k distinct keys uniformly at random."""
    return min(k, n_keys) / n_keys
