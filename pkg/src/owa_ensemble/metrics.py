"""Binary-classification metrics: confusion-count scalars and ROC/AUC.

Zero-denominator metrics evaluate to 0 and carry a degenerate flag instead
of raising, so a degenerate evaluation fold cannot abort a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise DataError(f"confusion count {name} must be a nonnegative integer, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion_from_predictions(y_true, y_pred) -> ConfusionCounts:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise DimensionError("labels and predictions disagree on sample count")
    return ConfusionCounts(
        tp=int(((y_pred == 1) & (y_true == 1)).sum()),
        fp=int(((y_pred == 1) & (y_true == 0)).sum()),
        tn=int(((y_pred == 0) & (y_true == 0)).sum()),
        fn=int(((y_pred == 0) & (y_true == 1)).sum()),
    )


@dataclass(frozen=True)
class ScalarMetrics:
    precision: float
    specificity: float
    accuracy: float
    sensitivity: float
    mcc: float
    f1: float
    degenerate: tuple = ()

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "specificity": self.specificity,
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "mcc": self.mcc,
            "f1": self.f1,
        }


METRIC_NAMES = ("precision", "specificity", "accuracy", "sensitivity", "mcc", "f1")


def compute_metrics(counts: ConfusionCounts) -> ScalarMetrics:
    """The six scalar metrics from one confusion table."""
    if counts.total <= 0:
        raise DataError("cannot compute metrics over zero samples")
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    degenerate = []

    def ratio(num, den, name):
        if den == 0:
            degenerate.append(name)
            return 0.0
        return num / den

    precision = ratio(tp, tp + fp, "precision")
    specificity = ratio(tn, tn + fp, "specificity")
    accuracy = (tp + tn) / counts.total
    sensitivity = ratio(tp, tp + fn, "sensitivity")

    mcc_den_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if mcc_den_sq == 0:
        degenerate.append("mcc")
        mcc = 0.0
    else:
        mcc = (tp * tn - fp * fn) / math.sqrt(mcc_den_sq)

    if precision + sensitivity == 0.0:
        degenerate.append("f1")
        f1 = 0.0
    else:
        f1 = 2.0 * precision * sensitivity / (precision + sensitivity)

    return ScalarMetrics(
        precision, specificity, accuracy, sensitivity, mcc, f1, tuple(degenerate)
    )


@dataclass
class RocCurve:
    thresholds: np.ndarray  # leading +inf for the (0, 0) point
    points: list  # (fpr, tpr) pairs from (0, 0) to (1, 1)
    auc: float


def roc_curve(scores, labels) -> RocCurve:
    """ROC by sweeping the distinct scores descending; AUC by trapezoids.

    Equal scores collapse into a single step, which makes the trapezoidal
    area equal to the pairwise-ranking estimator with ties counted 1/2.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DimensionError("scores and labels must be 1-D and aligned")
    if not np.all(np.isfinite(scores)):
        raise DataError("scores contain non-finite values")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes present")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    block_ends = np.concatenate([distinct, [scores.size - 1]])
    tp_cum = np.cumsum(sorted_labels == 1)[block_ends]
    fp_cum = np.cumsum(sorted_labels == 0)[block_ends]

    tpr = np.concatenate([[0.0], tp_cum / n_pos])
    fpr = np.concatenate([[0.0], fp_cum / n_neg])
    thresholds = np.concatenate([[np.inf], sorted_scores[block_ends]])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds, list(zip(fpr.tolist(), tpr.tolist())), auc)


def auc_pairwise(scores, labels) -> float:
    """Pairwise-comparison AUC estimator: P(pos outranks neg), ties count 1/2.

    Independent of the threshold sweep; used as an oracle for it.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise DataError("AUC needs both classes present")
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((wins + 0.5 * ties) / (pos.size * neg.size))
