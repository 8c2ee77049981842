"""Pixel-classification metrics: confusion counts, accuracy, F1, IoU.

Positive class = melt pool. The vacuous case (both masks empty) is defined
as a perfect score of 1.0, with a warning.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .raster import validate_mask


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


def confusion(pred: np.ndarray, truth: np.ndarray) -> ConfusionCounts:
    pred = validate_mask(pred)
    truth = validate_mask(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    tp = int(np.count_nonzero(pred & truth))
    tn = int(np.count_nonzero(~pred & ~truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    return ConfusionCounts(tp, tn, fp, fn)


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise ValueError("confusion counts are empty")
    return (c.tp + c.tn) / c.total


def f1(c: ConfusionCounts) -> float:
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        warnings.warn("both masks empty; F1 defined as 1.0", stacklevel=2)
        return 1.0
    return 2 * c.tp / denom


def iou(c: ConfusionCounts) -> float:
    denom = c.tp + c.fp + c.fn
    if denom == 0:
        warnings.warn("both masks empty; IoU defined as 1.0", stacklevel=2)
        return 1.0
    return c.tp / denom


def evaluate_pair(pred: np.ndarray, truth: np.ndarray) -> dict[str, float]:
    c = confusion(pred, truth)
    return {"accuracy": accuracy(c), "f1": f1(c), "iou": iou(c)}


def evaluate_dataset(
    pairs: list[tuple[np.ndarray, np.ndarray]],
) -> tuple[list[dict[str, float]], dict[str, float]]:
    """Per-image metrics plus their arithmetic means across the dataset."""
    per_image = [evaluate_pair(pred, truth) for pred, truth in pairs]
    if not per_image:
        return [], {"accuracy": float("nan"), "f1": float("nan"), "iou": float("nan")}
    means = {key: float(np.mean([m[key] for m in per_image])) for key in per_image[0]}
    return per_image, means
