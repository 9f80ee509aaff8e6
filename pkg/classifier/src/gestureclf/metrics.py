"""Confusion matrices and per-class F1 for the 8 hand-sign classes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import LABELS


def confusion_matrix(y_true, y_pred, n_classes: int = 8) -> np.ndarray:
    """(n, n) int64 matrix; rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have equal length")
    if y_true.size and (
        y_true.min() < 0 or y_true.max() >= n_classes
        or y_pred.min() < 0 or y_pred.max() >= n_classes
    ):
        raise ValueError(f"class index outside [0, {n_classes})")
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(matrix, (y_true, y_pred), 1)
    return matrix


def f1_scores(matrix: np.ndarray) -> np.ndarray:
    """Per-class F1 = 2PR/(P+R) with empty precision/recall treated as 0."""
    matrix = np.asarray(matrix, dtype=np.float64)
    tp = np.diag(matrix)
    col = matrix.sum(axis=0)
    row = matrix.sum(axis=1)
    precision = np.divide(tp, col, out=np.zeros_like(tp), where=col > 0)
    recall = np.divide(tp, row, out=np.zeros_like(tp), where=row > 0)
    denom = precision + recall
    return np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)


@dataclass(frozen=True)
class EvalReport:
    confusion: np.ndarray  # (8, 8) int64, rows = truth
    per_class_f1: np.ndarray  # (8,)
    macro_f1: float
    sample_count: int

    def __post_init__(self):
        matrix = np.asarray(self.confusion, dtype=np.int64)
        if matrix.min(initial=0) < 0:
            raise ValueError("confusion entries must be non-negative")
        if int(matrix.sum()) != self.sample_count:
            raise ValueError("confusion total must equal the sample count")
        f1 = np.asarray(self.per_class_f1, dtype=np.float64)
        if f1.size and (f1.min() < 0.0 or f1.max() > 1.0):
            raise ValueError("per-class F1 must lie in [0, 1]")
        object.__setattr__(self, "confusion", matrix)
        object.__setattr__(self, "per_class_f1", f1)

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "EvalReport":
        matrix = confusion_matrix(y_true, y_pred, n_classes=len(LABELS))
        f1 = f1_scores(matrix)
        return cls(
            confusion=matrix,
            per_class_f1=f1,
            macro_f1=float(f1.mean()),
            sample_count=int(matrix.sum()),
        )

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "per_class_f1": {label: float(v) for label, v in zip(LABELS, self.per_class_f1)},
            "macro_f1": self.macro_f1,
            "sample_count": self.sample_count,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
