import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seizsim.errors import UndefinedMetricError
from seizsim.metrics import (
    ConfusionMatrix,
    accuracy,
    auc,
    confusion_from_decisions,
    fpr_per_hour,
    macro_average,
    metrics_csv,
    pooled_summary,
    sensitivity,
    specificity,
    summarize,
)

counts = st.integers(min_value=0, max_value=10_000)


def pairwise_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for a, b in itertools.product(pos, neg):
        total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def test_confusion_small_cases():
    assert confusion_from_decisions([1, 0], [1, 0]) == ConfusionMatrix(tp=1, tn=1, fp=0, fn=0)
    assert confusion_from_decisions([0] * 5, [1] * 5).fn == 5


def test_confusion_matches_tally_loop():
    rng = np.random.default_rng(3)
    d = rng.integers(0, 2, 1000)
    y = rng.integers(0, 2, 1000)
    tally = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
    for a, b in zip(d, y):
        key = ("t" if a == b else "f") + ("p" if a == 1 else "n")
        tally[key] += 1
    assert confusion_from_decisions(d, y) == ConfusionMatrix(**tally)


def test_sensitivity_specificity_values():
    assert sensitivity(ConfusionMatrix(tp=94, fn=6)) == pytest.approx(0.94, abs=1e-15)
    assert specificity(ConfusionMatrix(fp=0, tn=1)) == 1.0
    with pytest.raises(UndefinedMetricError):
        sensitivity(ConfusionMatrix(tn=4, fp=1))
    with pytest.raises(UndefinedMetricError):
        specificity(ConfusionMatrix(tp=3))


def test_accuracy_values():
    assert accuracy(ConfusionMatrix(tp=50, tn=50)) == 1.0
    assert accuracy(ConfusionMatrix(fp=50, fn=50)) == 0.0
    assert accuracy(ConfusionMatrix(tp=9, tn=90, fp=1, fn=0)) == pytest.approx(0.99, abs=1e-15)
    with pytest.raises(UndefinedMetricError):
        accuracy(ConfusionMatrix())


def test_false_alarms_per_hour_values():
    assert fpr_per_hour(ConfusionMatrix(tn=10)) == 0.0
    assert fpr_per_hour(ConfusionMatrix(fp=9, tn=891)) == pytest.approx(9.0, abs=1e-12)
    # 900 / 3900 = 0.230769...
    assert fpr_per_hour(ConfusionMatrix(fp=1, tn=3899)) == pytest.approx(0.2308, abs=5e-5)


def test_auc_examples():
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.3] * 6, [0, 1, 0, 1, 0, 1]) == 0.5
    rng = np.random.default_rng(11)
    s = rng.random(20)
    y = np.array([0, 1] * 10)
    assert auc(s, y) == pairwise_auc(s, y)
    with pytest.raises(UndefinedMetricError):
        auc([0.1, 0.2], [1, 1])


@given(st.integers(0, 2**32 - 1))
def test_auc_matches_pair_counting_with_ties(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    s = rng.integers(0, 6, n) / 5.0  # coarse grid forces ties
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    assert auc(s, y) == pytest.approx(pairwise_auc(s, y), abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_auc_invariant_under_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    s = rng.random(30)
    y = rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    assert auc(s, y) == auc(np.exp(3 * s) - 7, y)


@given(counts, counts, counts, counts)
def test_metric_ranges_and_identities(tp, tn, fp, fn):
    cm = ConfusionMatrix(tp, tn, fp, fn)
    P, N = tp + fn, tn + fp
    if P:
        assert 0 <= sensitivity(cm) <= 1
    if N:
        assert 0 <= specificity(cm) <= 1
        assert fpr_per_hour(cm) == pytest.approx((1 - specificity(cm)) * 900, rel=1e-12, abs=1e-9)
    if P and N:
        acc = accuracy(cm)
        assert 0 <= acc <= 1
        expect = (sensitivity(cm) * P + specificity(cm) * N) / (P + N)
        assert acc == pytest.approx(expect, rel=1e-12)


def test_summary_marks_undefined_as_none():
    s = summarize(ConfusionMatrix(tn=5))
    assert s["sensitivity"] is None and s["specificity"] == 1.0 and s["auc"] is None


def test_macro_and_pooled_differ_as_expected():
    a = ConfusionMatrix(tp=9, fn=1, tn=90)
    b = ConfusionMatrix(tp=1, fn=9, tn=10)
    macro = macro_average([summarize(a), summarize(b)])
    pooled = pooled_summary([a, b])
    assert macro["sensitivity"] == pytest.approx(0.5)
    assert pooled["sensitivity"] == pytest.approx(0.5)
    assert macro["accuracy"] == pytest.approx((0.99 + 0.55) / 2)
    assert pooled["accuracy"] == pytest.approx(110 / 120)


def test_metrics_csv_layout():
    text = metrics_csv([{"patient": "p1", "modality": "ecg", "fusion": "stream",
                         **summarize(ConfusionMatrix(tp=1, tn=1))}])
    header, row = text.strip().split("\n")
    assert header.startswith("patient,modality,fusion,sensitivity")
    assert row.startswith("p1,ecg,stream,1.0,1.0,1.0,0.0,,1,1,0,0")
