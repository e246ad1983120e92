from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

SPLIT_RATIOS = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class DatasetSplit:
    train: NDArray[np.int64]
    val: NDArray[np.int64]
    test: NDArray[np.int64]

    def to_dict(self) -> dict[str, list[int]]:
        return {"train": self.train.tolist(), "val": self.val.tolist(), "test": self.test.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, list[int]]) -> "DatasetSplit":
        return cls(
            np.array(data["train"], dtype=np.int64),
            np.array(data["val"], dtype=np.int64),
            np.array(data["test"], dtype=np.int64),
        )


def split_dataset(
    labels: NDArray[np.int64],
    seed: int,
    ratios: tuple[float, float, float] = SPLIT_RATIOS,
) -> DatasetSplit:
    """Stratified train/val/test split; each class contributes round(n * ratio) to val and test."""
    if not np.isclose(sum(ratios), 1.0) or min(ratios) < 0.0:
        raise ValueError(f"Split ratios must be non-negative and sum to 1, got {ratios}")
    rng = np.random.default_rng(seed)
    train: list[int] = []
    val: list[int] = []
    test: list[int] = []
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        n_val = int(round(len(members) * ratios[1]))
        n_test = int(round(len(members) * ratios[2]))
        if n_val + n_test >= len(members):
            # too few to hold any out
            train += members.tolist()
            continue
        val += members[:n_val].tolist()
        test += members[n_val : n_val + n_test].tolist()
        train += members[n_val + n_test :].tolist()
    return DatasetSplit(
        np.sort(np.array(train, dtype=np.int64)),
        np.sort(np.array(val, dtype=np.int64)),
        np.sort(np.array(test, dtype=np.int64)),
    )


def training_subset(train: NDArray[np.int64], fraction: float, seed: int) -> NDArray[np.int64]:
    """A seeded random fraction of the training indices."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"Training fraction must be in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    n = max(1, int(round(len(train) * fraction)))
    return np.sort(rng.choice(train, size=n, replace=False))
