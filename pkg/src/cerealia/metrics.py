"""Evaluation metrics: multi-class confusion counts, one-vs-rest precision,
recall and F1, and the regression triple (MAE, RMSE, R2).

Everything here is computed from first principles on plain arrays so the
numbers can be cross-checked by brute-force recounting in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, ShapeError
from .model import CLASS_ORDER, NoiseClass, class_index


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts[i][j] = windows with true class i predicted as class j.

    Rows and columns follow CLASS_ORDER (clean, random, malfunction,
    drift, bias).
    """

    counts: np.ndarray
    classes: tuple[NoiseClass, ...] = CLASS_ORDER

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if c.shape != (k, k):
            raise ShapeError("confusion counts must be (%d, %d), got %r" % (k, k, c.shape))
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(
    true_labels: Sequence[NoiseClass], predicted_labels: Sequence[NoiseClass]
) -> ConfusionMatrix:
    if len(true_labels) != len(predicted_labels):
        raise ShapeError(
            "label sequences differ in length: %d vs %d"
            % (len(true_labels), len(predicted_labels))
        )
    if len(true_labels) == 0:
        raise EmptyInputError("cannot build a confusion matrix from zero labels")
    k = len(CLASS_ORDER)
    counts = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        counts[class_index(t), class_index(p)] += 1
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int
    degenerate: bool = False


def f1_from_pr(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def prf1(matrix: ConfusionMatrix, label: NoiseClass) -> ClassScores:
    """One-vs-rest precision, recall, F1 for one class.

    A zero denominator (no predictions of the class, or no true members)
    yields 0.0 for the affected score and sets the degenerate flag.
    """
    i = matrix.classes.index(label)
    c = matrix.counts
    tp = int(c[i, i])
    fp = int(c[:, i].sum() - tp)
    fn = int(c[i, :].sum() - tp)
    degenerate = False
    if tp + fp == 0:
        precision, degenerate = 0.0, True
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, degenerate = 0.0, True
    else:
        recall = tp / (tp + fn)
    return ClassScores(
        precision=precision,
        recall=recall,
        f1=f1_from_pr(precision, recall),
        support=tp + fn,
        degenerate=degenerate,
    )


def macro_f1(matrix: ConfusionMatrix, labels: Sequence[NoiseClass] | None = None) -> float:
    """Unweighted mean F1 over the given labels (default: all five)."""
    labels = tuple(labels) if labels is not None else matrix.classes
    return float(np.mean([prf1(matrix, lab).f1 for lab in labels]))


def accuracy(matrix: ConfusionMatrix) -> float:
    return float(np.trace(matrix.counts) / matrix.total)


@dataclass(frozen=True)
class RegressionMetrics:
    """MAE, RMSE and R2. r2 is None when the target is constant, in which
    case r2_defined is False and MAE/RMSE are still meaningful."""

    mae: float
    rmse: float
    r2: float | None
    n: int

    @property
    def r2_defined(self) -> bool:
        return self.r2 is not None


def regression_metrics(y_true, y_pred) -> RegressionMetrics:
    y = np.asarray(y_true, dtype=np.float64).ravel()
    p = np.asarray(y_pred, dtype=np.float64).ravel()
    if y.shape != p.shape:
        raise ShapeError("y_true and y_pred differ in length: %d vs %d" % (y.size, p.size))
    if y.size == 0:
        raise EmptyInputError("cannot score zero predictions")
    err = p - y
    mae = float(np.mean(np.abs(err)))
    rmse = float(math.sqrt(np.mean(err * err)))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = None
    else:
        r2 = float(1.0 - np.sum(err * err) / ss_tot)
    return RegressionMetrics(mae=mae, rmse=rmse, r2=r2, n=int(y.size))
