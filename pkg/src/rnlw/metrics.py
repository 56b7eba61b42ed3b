"""Segmentation quality metrics: confusion matrix and mean IoU.

Ignore-labeled pixels (default 255) are excluded from all counts. The mean
runs over classes present in ground truth or prediction; classes absent from
both are excluded (the dominant VOC convention).
"""
from __future__ import annotations

import numpy as np

from .errors import DataError, DimensionError


class ConfusionMatrix:
    def __init__(self, num_classes: int, ignore_label: int = 255):
        if num_classes < 1:
            raise DataError(f"need at least one class, got {num_classes}")
        self.num_classes = num_classes
        self.ignore_label = ignore_label
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def _validate(self, labels: np.ndarray, which: str) -> None:
        bad = (labels >= self.num_classes) & (labels != self.ignore_label)
        bad |= labels < 0
        if bad.any():
            val = int(labels[bad].flat[0])
            raise DataError(
                f"{which} label {val} is outside [0, {self.num_classes}) "
                f"and is not the ignore label {self.ignore_label}")

    def update(self, pred, gt) -> None:
        """Accumulate one pair of equal-shaped label maps (rows = gt)."""
        pred = np.asarray(pred)
        gt = np.asarray(gt)
        if pred.shape != gt.shape:
            raise DimensionError(f"label maps differ: {pred.shape} vs {gt.shape}")
        self._validate(pred, "prediction")
        self._validate(gt, "ground-truth")
        scored = (gt != self.ignore_label) & (pred != self.ignore_label)
        p = pred[scored].astype(np.int64)
        g = gt[scored].astype(np.int64)
        k = self.num_classes
        self.counts += np.bincount(g * k + p, minlength=k * k).reshape(k, k)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_update(cm: ConfusionMatrix, pred, gt) -> None:
    cm.update(pred, gt)


def mean_iou(cm: ConfusionMatrix) -> float:
    """IoU_k = TP/(TP+FP+FN), averaged over classes present in GT or Pred."""
    tp = np.diag(cm.counts).astype(np.float64)
    gt_count = cm.counts.sum(axis=1).astype(np.float64)
    pred_count = cm.counts.sum(axis=0).astype(np.float64)
    union = gt_count + pred_count - tp
    present = union > 0
    if not present.any():
        return 0.0
    return float((tp[present] / union[present]).mean())


def per_class_iou(cm: ConfusionMatrix) -> np.ndarray:
    """IoU per class; NaN for classes absent from both maps."""
    tp = np.diag(cm.counts).astype(np.float64)
    union = cm.counts.sum(axis=1) + cm.counts.sum(axis=0) - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(union > 0, tp / union, np.nan)
