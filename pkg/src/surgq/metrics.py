"""Segmentation evaluation: per-class and mean dice coefficient.

Dice for a class is 2|P∩T| / (|P|+|T|) over that class's pixel sets and
equals the per-pixel F1 score. Reports pool pixel counts across frames
(micro aggregation); classes absent from both prediction and truth are
excluded from the mean rather than counted as perfect.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, LengthMismatch
from .scene import CLASS_NAMES, N_CLASSES, ClassMap


@dataclass(frozen=True)
class DiceReport:
    per_class: tuple[Optional[float], ...]  # None where the class is absent
    mean: float
    n_frames: int
    aggregation: str = "pooled"

    def rows(self) -> list[tuple[str, Optional[float]]]:
        """(class name, score) rows in fixed class order, then the mean."""
        out = [(CLASS_NAMES[c], self.per_class[c]) for c in range(N_CLASSES)]
        out.append(("Mean", self.mean))
        return out


def _class_counts(pred: ClassMap, truth: ClassMap) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if (pred.height, pred.width) != (truth.height, truth.width):
        raise DimensionMismatch(
            f"prediction is {pred.width}x{pred.height}, truth is {truth.width}x{truth.height}"
        )
    p = pred.labels.ravel()
    t = truth.labels.ravel()
    inter = np.bincount(p[p == t], minlength=N_CLASSES)
    p_count = np.bincount(p, minlength=N_CLASSES)
    t_count = np.bincount(t, minlength=N_CLASSES)
    return inter, p_count, t_count


def dice(pred: ClassMap, truth: ClassMap, class_id: int) -> Optional[float]:
    """Dice for one class; None when the class appears in neither map."""
    inter, p_count, t_count = _class_counts(pred, truth)
    denom = int(p_count[class_id] + t_count[class_id])
    if denom == 0:
        return None
    return 2.0 * int(inter[class_id]) / denom


def dice_report(
    pred_frames: Sequence[ClassMap], truth_frames: Sequence[ClassMap]
) -> DiceReport:
    """Pooled per-class dice over aligned frame lists, plus their mean."""
    if len(pred_frames) != len(truth_frames):
        raise LengthMismatch(
            f"{len(pred_frames)} predictions vs {len(truth_frames)} truth frames"
        )
    inter = np.zeros(N_CLASSES, dtype=np.int64)
    p_count = np.zeros(N_CLASSES, dtype=np.int64)
    t_count = np.zeros(N_CLASSES, dtype=np.int64)
    for pred, truth in zip(pred_frames, truth_frames):
        i, p, t = _class_counts(pred, truth)
        inter += i
        p_count += p
        t_count += t
    denom = p_count + t_count
    per_class: list[Optional[float]] = []
    included = []
    for c in range(N_CLASSES):
        if denom[c] == 0:
            per_class.append(None)
        else:
            score = 2.0 * inter[c] / denom[c]
            per_class.append(score)
            included.append(score)
    mean = float(np.mean(included)) if included else 0.0
    return DiceReport(tuple(per_class), mean, len(pred_frames))
