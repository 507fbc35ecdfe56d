"""Evaluation metrics: logloss, ROC AUC and RelaImp."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DataError, MetricUndefinedError
from .losses import bce

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MetricsReport:
    logloss: float
    auc: float
    sample_count: int
    positive_count: int
    relaimp_vs_baseline: Optional[float] = None

    def to_json(self):
        return {"schema_version": REPORT_SCHEMA_VERSION, **asdict(self)}

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj)
        version = obj.pop("schema_version", None)
        if version != REPORT_SCHEMA_VERSION:
            raise DataError(f"unsupported metrics report version {version!r}")
        return cls(**obj)


def _pair(labels, scores):
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise DataError(f"labels {y.shape} and scores {s.shape} must be equal-length vectors")
    if y.size == 0:
        raise DataError("metric on an empty set")
    return y, s


def logloss(labels, scores):
    y, s = _pair(labels, scores)
    return float(np.mean(bce(y, s)))


def average_ranks(values):
    """1-based ranks with tied values sharing the mean of their positions."""
    values = np.asarray(values)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    n = len(values)
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], n]
    group_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(group_rank, ends - starts)
    return ranks


def auc(labels, scores):
    """ROC AUC as the Mann-Whitney statistic; tied (pos, neg) pairs count 1/2."""
    y, s = _pair(labels, scores)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("AUC needs at least one positive and one negative label")
    rank_sum = average_ranks(s)[pos].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def rela_imp(auc_baseline, auc_new):
    """Relative AUC improvement over the random-guess level, in percent."""
    if not auc_baseline > 0.5:
        raise MetricUndefinedError(f"RelaImp undefined for baseline AUC {auc_baseline} <= 0.5")
    return ((auc_new - 0.5) / (auc_baseline - 0.5) - 1.0) * 100.0


def report(labels, scores):
    y, s = _pair(labels, scores)
    return MetricsReport(
        logloss=logloss(y, s),
        auc=auc(y, s),
        sample_count=int(len(y)),
        positive_count=int((y == 1).sum()),
    )
