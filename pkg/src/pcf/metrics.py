"""Binary-classification evaluation: confusion counts, the three ratio
metrics and AUC-ROC via the rank-sum statistic."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError, UndefinedMetric

POSITIVE = 1


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise DataError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(predictions, truth) -> Confusion:
    predictions = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predictions.shape != truth.shape or predictions.ndim != 1:
        raise DataError("predictions and truth must be equal-length vectors")
    if len(predictions) == 0:
        raise DataError("cannot build a confusion matrix from no samples")
    pos_pred = predictions == POSITIVE
    pos_true = truth == POSITIVE
    return Confusion(
        tp=int(np.sum(pos_pred & pos_true)),
        fp=int(np.sum(pos_pred & ~pos_true)),
        tn=int(np.sum(~pos_pred & ~pos_true)),
        fn=int(np.sum(~pos_pred & pos_true)),
    )


def accuracy(c: Confusion) -> float:
    if c.total == 0:
        raise UndefinedMetric("accuracy undefined with no samples")
    return (c.tp + c.tn) / c.total


def specificity(c: Confusion) -> float:
    if c.tn + c.fp == 0:
        raise UndefinedMetric("specificity undefined with no negative samples")
    return c.tn / (c.tn + c.fp)


def sensitivity(c: Confusion) -> float:
    if c.tp + c.fn == 0:
        raise UndefinedMetric("sensitivity undefined with no positive samples")
    return c.tp / (c.tp + c.fn)


def auc_roc(scores, truth) -> float:
    """P(score of a positive > score of a negative) with half credit for
    ties, computed from average ranks."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=np.int64)
    if scores.shape != truth.shape or scores.ndim != 1:
        raise DataError("scores and truth must be equal-length vectors")
    pos = truth == POSITIVE
    n_pos = int(pos.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present in the truth")
    ranks = rankdata(scores)
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def write_report_csv(rows: list[tuple[str, float, float, float, float]], stream) -> None:
    """Evaluation table: one row per algorithm."""
    writer = csv.writer(stream)
    writer.writerow(["algorithm", "accuracy", "specificity", "sensitivity", "auc_roc"])
    for name, acc, spec, sens, auc in rows:
        writer.writerow([name, repr(acc), repr(spec), repr(sens), repr(auc)])
