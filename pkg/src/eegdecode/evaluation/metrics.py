"""Confusion matrices and per-class precision / recall / F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Metrics:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    confusion: np.ndarray          # counts, rows = true class
    zero_division: np.ndarray      # bool per class: some denominator was 0

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy,
                "precision": self.precision.tolist(),
                "recall": self.recall.tolist(),
                "f1": self.f1.tolist(),
                "confusion": self.confusion.tolist(),
                "zero_division": self.zero_division.tolist()}


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("label vectors must have equal length")
    for name, y in (("true", y_true), ("predicted", y_pred)):
        if y.size and (y.min() < 0 or y.max() >= n_classes):
            raise ValueError(f"{name} label outside [0, {n_classes})")
    return np.bincount(y_true * n_classes + y_pred,
                       minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def compute_metrics(y_true, y_pred, n_classes: int) -> Metrics:
    """precision = TP/(TP+FP), recall = TP/(TP+FN), F1 their harmonic mean.

    A zero denominator yields 0 for that metric and sets the class flag.
    """
    cm = confusion_matrix(y_true, y_pred, n_classes)
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    actual = cm.sum(axis=1).astype(np.float64)

    precision = np.divide(tp, predicted, out=np.zeros(n_classes), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros(n_classes), where=actual > 0)
    pr_sum = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr_sum, out=np.zeros(n_classes), where=pr_sum > 0)
    flags = (predicted == 0) | (actual == 0) | (pr_sum == 0)

    total = cm.sum()
    accuracy = float(tp.sum() / total) if total else 0.0
    return Metrics(accuracy, precision, recall, f1, cm, flags)


def normalize_confusion(cm: np.ndarray) -> np.ndarray:
    """Row-normalize so each true-class row sums to one (empty rows stay zero)."""
    cm = np.asarray(cm, dtype=np.float64)
    row_sums = cm.sum(axis=1, keepdims=True)
    return np.divide(cm, row_sums, out=np.zeros_like(cm), where=row_sums > 0)
