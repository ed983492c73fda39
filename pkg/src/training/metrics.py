"""Pixel-level confusion counts and the five change-detection scores."""

from typing import Iterable

import numpy as np
import torch

from src.core.schemas import ConfusionMatrix, MetricReport


def _as_bool(x: np.ndarray | torch.Tensor) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        x = x.detach().cpu().numpy()
    return np.asarray(x).astype(bool)


def accumulate(pred: np.ndarray | torch.Tensor, label: np.ndarray | torch.Tensor) -> ConfusionMatrix:
    """Count TP/FP/TN/FN between two binary maps of equal shape.

    Raises:
        ValueError: If shapes differ
    """
    p, y = _as_bool(pred), _as_bool(label)
    if p.shape != y.shape:
        raise ValueError(f"Prediction {p.shape} and label {y.shape} differ")
    tp = int(np.count_nonzero(p & y))
    fp = int(np.count_nonzero(p & ~y))
    fn = int(np.count_nonzero(~p & y))
    tn = int(p.size) - tp - fp - fn
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def merge(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionMatrix:
    return a + b


def merge_all(matrices: Iterable[ConfusionMatrix]) -> ConfusionMatrix:
    return sum(matrices, ConfusionMatrix())


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def scores(cm: ConfusionMatrix) -> MetricReport:
    """Precision, recall, F1, OA and IoU from global counts.

    Any score whose denominator is zero is reported as 0; OA is defined for
    any non-empty matrix.

    Raises:
        ValueError: If the matrix counts no pixels
    """
    if cm.total < 1:
        raise ValueError("Cannot score an empty confusion matrix")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricReport(
        f1=f1,
        precision=precision,
        recall=recall,
        oa=(cm.tp + cm.tn) / cm.total,
        iou=_ratio(cm.tp, cm.tp + cm.fp + cm.fn),
    )
