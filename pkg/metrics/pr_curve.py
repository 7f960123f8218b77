"""
Precision-Recall Curve
Threshold sweeps over pooled pixels and the area under the curve (MPA)
"""

import csv
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from metrics.confusion import ConfusionCounts, MetricsError, precision, recall

logger = logging.getLogger(__name__)

# 0.00, 0.01, ..., 1.00 with exact 0.5
DEFAULT_THRESHOLDS = tuple(np.arange(101) / 100.0)

CSV_HEADER = ('threshold', 'precision', 'recall')


class PrPoint(NamedTuple):
    threshold: float
    precision: float
    recall: float


@dataclass(frozen=True)
class PrCurve:
    """
    PR points ordered by strictly decreasing threshold
    """
    points: tuple

    def point_at(self, threshold):
        for point in self.points:
            if point.threshold == threshold:
                return point
        raise MetricsError(f"Curve has no point at threshold {threshold}")

    @property
    def recalls(self):
        return np.array([p.recall for p in self.points])

    @property
    def precisions(self):
        return np.array([p.precision for p in self.points])


def _pooled(scores, truths):
    if len(scores) != len(truths):
        raise MetricsError(f"{len(scores)} score maps for {len(truths)} truth masks")

    flat_scores = []
    flat_truths = []
    for score, truth in zip(scores, truths):
        score = np.asarray(score, dtype=np.float64)
        truth = np.asarray(truth).astype(bool)
        if score.shape != truth.shape:
            raise MetricsError(f"Score map {score.shape} and truth {truth.shape} differ in shape")
        flat_scores.append(score.ravel())
        flat_truths.append(truth.ravel())

    if not flat_scores:
        return np.zeros(0), np.zeros(0, dtype=bool)
    return np.concatenate(flat_scores), np.concatenate(flat_truths)


def curve_counts(scores, truths, thresholds):
    """
    Pooled confusion counts for each threshold (score >= t is crack)

    Args:
        scores: List of H x W crack scores
        truths: List of aligned masks
        thresholds: Threshold values

    Returns:
        List of ConfusionCounts in threshold order
    """
    values, labels = _pooled(scores, truths)

    order = np.argsort(values, kind='stable')
    sorted_values = values[order]
    # positives among the first k sorted pixels
    positives_below = np.concatenate([[0], np.cumsum(labels[order])])

    n_total = values.size
    n_pos = int(positives_below[-1])

    counts = []
    for t in thresholds:
        k = int(np.searchsorted(sorted_values, t, side='left'))
        tp = n_pos - int(positives_below[k])
        predicted = n_total - k
        fp = predicted - tp
        fn = n_pos - tp
        counts.append(ConfusionCounts(tp, fp, fn, n_total - tp - fp - fn))

    return counts


def pr_curve(prob_maps, truths, thresholds=DEFAULT_THRESHOLDS):
    """
    Sweep thresholds over pooled pixels

    Args:
        prob_maps: List of ProbMap (crack channel is the score)
        truths: List of aligned masks
        thresholds: Values in [0, 1]

    Returns:
        PrCurve
    """
    return pr_curve_from_scores([p.crack for p in prob_maps], truths, thresholds)


def pr_curve_from_scores(scores, truths, thresholds=DEFAULT_THRESHOLDS):
    """
    Same as pr_curve but on raw H x W score grids

    Args:
        scores: List of score grids
        truths: List of aligned masks
        thresholds: Values in [0, 1]

    Returns:
        PrCurve
    """
    thresholds = sorted({float(t) for t in thresholds}, reverse=True)
    if any(t < 0.0 or t > 1.0 for t in thresholds):
        raise MetricsError("Thresholds must lie in [0, 1]")

    points = tuple(
        PrPoint(t, precision(c), recall(c))
        for t, c in zip(thresholds, curve_counts(scores, truths, thresholds))
    )
    return PrCurve(points)


def mpa(curve):
    """
    Area under precision over recall

    Points are sorted by recall, the (R=0, P=1) anchor is prepended and
    equal-recall points keep their maximum precision before trapezoidal
    integration.

    Args:
        curve: PrCurve

    Returns:
        Area in [0, 1]
    """
    if not curve.points:
        raise MetricsError("Cannot integrate an empty PR curve")

    best = {0.0: 1.0}
    for point in curve.points:
        best[point.recall] = max(best.get(point.recall, 0.0), point.precision)

    r = np.array(sorted(best))
    p = np.array([best[v] for v in r])
    area = float(np.sum(np.diff(r) * (p[1:] + p[:-1]) / 2.0))

    return min(max(area, 0.0), 1.0)


def write_pr_csv(curve, path):
    """
    Export a curve as CSV with 12 significant digits

    Args:
        curve: PrCurve
        path: Output path
    """
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for point in curve.points:
            writer.writerow([f"{v:.12g}" for v in point])


def read_pr_csv(path):
    """
    Load a curve written by write_pr_csv

    Args:
        path: CSV path

    Returns:
        PrCurve
    """
    with open(path, newline='') as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise MetricsError(f"{path}: unexpected PR curve header {header}")
        points = tuple(PrPoint(*(float(v) for v in row)) for row in reader if row)

    return PrCurve(points)
