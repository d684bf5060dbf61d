"""Precision-recall analysis and the log-alpha robustness slope.

AUPRC uses the average-precision step formulation: precision-weighted
recall increments over descending distinct score thresholds, tied scores
grouped into a single threshold. No interpolation between points.

The robustness coefficient is an ordinary least-squares slope of a metric
against the logarithm of the test-side alpha ratio; flatter means more
stable under provenance-conditional label shift. Natural log by default,
with the base recorded alongside every fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = ["PRPoint", "SlopeFit", "pr_curve", "auprc", "fit_slope"]


class PRPoint(NamedTuple):
    recall: float
    precision: float
    threshold: float


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    n_points: int
    log_base: float = math.e


def _validate_scores_labels(scores: Sequence[float], labels: Sequence[int]):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or labels.ndim != 1:
        raise ValueError("scores and labels must be one-dimensional")
    if scores.shape != labels.shape:
        raise ValueError(
            f"length mismatch: {scores.shape[0]} scores vs {labels.shape[0]} labels"
        )
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    if not np.any(labels == 1):
        raise ValueError("at least one positive label required")
    return scores, labels.astype(np.int64)


def pr_curve(scores: Sequence[float], labels: Sequence[int]) -> list[PRPoint]:
    """Precision-recall points at descending distinct score thresholds.

    At each threshold t the positive-prediction set is {score >= t};
    precision = TP/(TP+FP) and recall = TP/P over that set. Tied scores
    enter at a single threshold, so recall is non-decreasing along the
    returned sequence.
    """
    scores, labels = _validate_scores_labels(scores, labels)
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    n_pos = int(sorted_labels.sum())

    points: list[PRPoint] = []
    tp = 0
    seen = 0
    i = 0
    n = len(sorted_scores)
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            j += 1
        tp += int(sorted_labels[i:j].sum())
        seen = j
        points.append(
            PRPoint(
                recall=tp / n_pos,
                precision=tp / seen,
                threshold=float(sorted_scores[i]),
            )
        )
        i = j
    return points


def auprc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Average precision: sum of (R_k - R_{k-1}) * P_k with R_0 = 0."""
    points = pr_curve(scores, labels)
    total = 0.0
    prev_recall = 0.0
    for pt in points:
        total += (pt.recall - prev_recall) * pt.precision
        prev_recall = pt.recall
    return total


def fit_slope(
    points: Sequence[tuple[float, float]], log_base: float = math.e
) -> SlopeFit:
    """Least-squares line of a metric against log(alpha_test).

    Needs at least two points covering at least two distinct alpha
    values. Scaling every alpha by a constant shifts the intercept only;
    changing the log base rescales the slope by a constant.
    """
    if len(points) < 2:
        raise ValueError("slope fit needs at least two points")
    alphas = np.asarray([a for a, _ in points], dtype=np.float64)
    metric = np.asarray([m for _, m in points], dtype=np.float64)
    if np.any(alphas <= 0.0):
        raise ValueError("alpha values must be positive")
    if len(set(alphas.tolist())) < 2:
        raise ValueError("slope fit needs at least two distinct alpha values")
    if log_base <= 0.0 or log_base == 1.0:
        raise ValueError("log base must be positive and not 1")
    x = np.log(alphas) / math.log(log_base)
    x_centered = x - x.mean()
    # Centering the metric as well makes a constant metric give slope 0
    # exactly instead of a rounding-noise residue.
    m_centered = metric - metric.mean()
    slope = float(np.dot(x_centered, m_centered) / np.dot(x_centered, x_centered))
    intercept = float(metric.mean() - slope * x.mean())
    return SlopeFit(slope=slope, intercept=intercept, n_points=len(points), log_base=log_base)
