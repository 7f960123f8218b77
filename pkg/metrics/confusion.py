"""
Confusion Counts
Pixel outcome counts and the precision/recall/F1 ratios built on them
"""

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class MetricsError(ValueError):
    """Raised for mismatched inputs or empty curves"""


@dataclass(frozen=True)
class ConfusionCounts:
    """
    Crack-positive pixel outcomes
    """
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other):
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tn + other.tn,
        )

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self):
        """Counts with background as the positive class"""
        return ConfusionCounts(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)

    def to_dict(self):
        return {'tp': self.tp, 'fp': self.fp, 'fn': self.fn, 'tn': self.tn}


@dataclass(frozen=True)
class MetricsReport:
    """
    Scalar summary of one evaluation
    """
    precision: float
    recall: float
    f1: float
    mpa: float
    global_accuracy: float

    def to_dict(self):
        return {
            'precision': self.precision,
            'recall': self.recall,
            'f1': self.f1,
            'mpa': self.mpa,
            'global-accuracy': self.global_accuracy,
        }


def confusion(pred, truth):
    """
    Count pixel outcomes with crack as the positive class

    Args:
        pred: Predicted label grid
        truth: Ground-truth label grid

    Returns:
        ConfusionCounts
    """
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)

    if pred.shape != truth.shape:
        raise MetricsError(f"Prediction {pred.shape} and truth {truth.shape} differ in shape")

    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = int(pred.size - tp - fp - fn)

    return ConfusionCounts(tp, fp, fn, tn)


def pooled_confusion(preds, truths):
    """Sum confusion counts over aligned lists of images"""
    if len(preds) != len(truths):
        raise MetricsError(f"{len(preds)} predictions for {len(truths)} truths")

    total = ConfusionCounts()
    for pred, truth in zip(preds, truths):
        total = total + confusion(pred, truth)
    return total


def precision(c):
    # no predicted crack pixel: curve anchor convention
    if c.tp + c.fp == 0:
        return 1.0
    return c.tp / (c.tp + c.fp)


def recall(c):
    if c.tp + c.fn == 0:
        return 1.0
    return c.tp / (c.tp + c.fn)


def f1(p, r):
    """
    Harmonic mean of precision and recall

    Args:
        p: Precision
        r: Recall

    Returns:
        2pr / (p + r), or 0 when both are 0
    """
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


def global_accuracy(c):
    if c.total == 0:
        return 1.0
    return (c.tp + c.tn) / c.total


def build_report(c, mpa_value):
    """
    Assemble a MetricsReport from counts and a curve area

    Args:
        c: ConfusionCounts at the operating point
        mpa_value: Area under the PR curve

    Returns:
        MetricsReport
    """
    p = precision(c)
    r = recall(c)
    return MetricsReport(
        precision=p,
        recall=r,
        f1=f1(p, r),
        mpa=mpa_value,
        global_accuracy=global_accuracy(c),
    )
