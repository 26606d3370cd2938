"""Confusion-matrix bookkeeping and the evaluation formulas.

Every decision scored here stands for one 4-second window, so the
false-positive rate per hour scales the per-decision rate by 3600 / 4.
Undefined metrics (zero denominators) raise :class:`UndefinedMetricError`
instead of returning a sentinel.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import AlignmentError, UndefinedMetricError

DECISIONS_PER_HOUR = 3600 / 4


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)


def confusion_from_decisions(decisions, labels) -> ConfusionMatrix:
    d = np.asarray(decisions).astype(bool).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if d.shape != y.shape:
        raise AlignmentError(f"{d.size} decisions vs {y.size} labels")
    return ConfusionMatrix(
        tp=int(np.count_nonzero(d & y)),
        tn=int(np.count_nonzero(~d & ~y)),
        fp=int(np.count_nonzero(d & ~y)),
        fn=int(np.count_nonzero(~d & y)),
    )


def _ratio(num, den, what):
    if den == 0:
        raise UndefinedMetricError(f"{what} undefined: zero denominator")
    return num / den


def sensitivity(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fn, "sensitivity")


def specificity(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tn, cm.tn + cm.fp, "specificity")


def accuracy(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tn + cm.tp, cm.total, "accuracy")


def fpr_per_hour(cm: ConfusionMatrix) -> float:
    """False alarms per hour: FP / (TN + FP) scaled by 900 decisions/hour."""
    return _ratio(cm.fp, cm.tn + cm.fp, "false positive rate") * DECISIONS_PER_HOUR


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Tied scores contribute one half, which average ranks give for free.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise AlignmentError(f"{s.size} scores vs {y.size} labels")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


METRIC_FIELDS = ("sensitivity", "specificity", "accuracy", "fph", "auc")


def _safe(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def summarize(cm: ConfusionMatrix, scores=None, labels=None) -> dict:
    """Metrics block for run reports. Undefined entries are ``None``."""
    out = {
        "sensitivity": _safe(sensitivity, cm),
        "specificity": _safe(specificity, cm),
        "accuracy": _safe(accuracy, cm),
        "fph": _safe(fpr_per_hour, cm),
        "auc": _safe(auc, scores, labels) if scores is not None else None,
    }
    out.update(asdict(cm))
    return out


def macro_average(summaries) -> dict:
    """Per-patient mean of each metric, skipping undefined entries."""
    out = {}
    for key in METRIC_FIELDS:
        vals = [s[key] for s in summaries if s.get(key) is not None]
        out[key] = float(np.mean(vals)) if vals else None
    return out


def pooled_summary(matrices) -> dict:
    """Metrics of the summed confusion matrix across patients."""
    total = ConfusionMatrix()
    for cm in matrices:
        total = total + cm
    return summarize(total)


CSV_COLUMNS = ("patient", "modality", "fusion", *METRIC_FIELDS, "tp", "tn", "fp", "fn")


def metrics_csv(rows) -> str:
    """Render report rows (dicts with CSV_COLUMNS keys) as CSV text."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()
