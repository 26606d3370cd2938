"""Acceptance gate: one test (or group) per criterion, at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from gradcheck import max_relative_error, random_params
from seizsim.metrics import (
    ConfusionMatrix,
    auc,
    fpr_per_hour,
    sensitivity,
    specificity,
)
from seizsim.netsim import (
    ChannelModel,
    NetworkConfig,
    OracleClassifier,
    PhyConfig,
    Scenario,
    parse_trace_line,
    run_simulation,
)
from seizsim.nn import BCE, FocalLossConfig, ModelSpec, TrainConfig, focal_loss, focal_loss_grad, predict_proba, train
from seizsim.pipeline import cmd_simulate, config_from_dict
from seizsim.predictor import DecisionBuffer, FusionConfig, time_vote
from seizsim.signals import (
    GeneratorConfig,
    PreictalShift,
    SampleWindow,
    duration_for_ratio,
    expected_ratio,
    generate_recording,
    label_windows,
    split_dataset,
    standardize,
)

C1 = pytest.mark.criterion(1, "focal loss (alpha 0.5, gamma 0) is half cross-entropy within 1e-12")
C2 = pytest.mark.criterion(2, "FL(0.5; y=1, alpha 0.2, gamma 2) = 0.0346574 +/- 1e-6")
C3 = pytest.mark.criterion(3, "analytic gradients match finite differences, rel err <= 1e-4, 100 draws")
C4 = pytest.mark.criterion(4, "time_vote equals popcount > 7 on all 2^15 buffers")
C5 = pytest.mark.criterion(5, "sensitivity / FPH identity / AUC pair-count oracles")
C6 = pytest.mark.criterion(6, "focal AUC >= BCE AUC and >= 0.90 on a separable 0.0826-ratio patient")
C7 = pytest.mark.criterion(7, "saturated MAC: drop rate 0.005 +/- 0.001, goodput >= 19.8 kbit/s")
C8 = pytest.mark.criterion(8, "AND fusion FPH below each single modality over 24 h")
C9 = pytest.mark.criterion(9, "cmd_simulate traces are byte-identical across runs")
C10 = pytest.mark.criterion(10, "every alert latency <= t_app = 4 s")


# -- 1 ---------------------------------------------------------------------

@C1
def test_focal_loss_reduces_to_half_cross_entropy():
    start = time.perf_counter()
    cfg = FocalLossConfig(alpha=0.5, gamma=0.0)
    for i in range(1, 100):
        p = i / 100
        assert abs(focal_loss(p, 1, cfg) - 0.5 * -math.log(p)) <= 1e-12
        assert abs(focal_loss(p, 0, cfg) - 0.5 * -math.log(1 - p)) <= 1e-12
    assert time.perf_counter() - start < 1.0


# -- 2 ---------------------------------------------------------------------

@C2
def test_focal_loss_point_value():
    independent = -0.2 * (1 - 0.5) ** 2 * math.log(0.5)
    assert abs(independent - 0.0346574) <= 1e-6
    assert abs(focal_loss(0.5, 1, FocalLossConfig(0.2, 2.0)) - 0.0346574) <= 1e-6


# -- 3 ---------------------------------------------------------------------

@C3
def test_focal_loss_grad_matches_central_differences():
    rng = np.random.default_rng(2024)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        p = rng.uniform(0.01, 0.99)
        y = int(rng.integers(2))
        cfg = FocalLossConfig(rng.uniform(0.05, 1.0), float(rng.choice([0.0, 0.5, 1.0, 2.0, 3.0])))
        numeric = (focal_loss(p + h, y, cfg) - focal_loss(p - h, y, cfg)) / (2 * h)
        analytic = focal_loss_grad(p, y, cfg)
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-7))
    assert worst <= 1e-4


@C3
def test_backward_matches_central_differences_over_100_draws():
    start = time.perf_counter()
    errors = []
    for s in range(100):
        rng = np.random.default_rng([2024, s])
        # Alternate single-sample running-stat draws with 4-sample batch-stat draws.
        spec = ModelSpec.miniature(2 if s % 2 else 1)
        n = 4 if s % 2 else 1
        params = random_params(spec, rng)
        x = rng.standard_normal((n, spec.input_channels, spec.input_length))
        y = rng.integers(0, 2, n)
        errors.append(max_relative_error(params, x, y, bn_mode="batch" if n > 1 else "running"))
    elapsed = time.perf_counter() - start
    assert max(errors) <= 1e-4, f"{sum(e > 1e-4 for e in errors)} draws over tolerance, worst {max(errors):.3g}"
    assert elapsed < 60.0


# -- 4 ---------------------------------------------------------------------

@C4
def test_time_vote_exhaustive():
    start = time.perf_counter()
    mismatches = 0
    for mask in range(1 << 15):
        buf = DecisionBuffer(15)
        for bit in range(15):
            buf.push((mask >> bit) & 1)
        mismatches += time_vote(buf) != int(bin(mask).count("1") > 7)
    assert mismatches == 0
    assert time.perf_counter() - start < 1.0


# -- 5 ---------------------------------------------------------------------

@C5
def test_sensitivity_point():
    assert sensitivity(ConfusionMatrix(tp=94, fn=6)) == pytest.approx(0.94, abs=1e-15)


@C5
def test_fph_identity_on_random_matrices():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        tp, tn, fp, fn = (int(v) for v in rng.integers(0, 5000, 4))
        tn += 1
        cm = ConfusionMatrix(tp, tn, fp, fn)
        assert fpr_per_hour(cm) == pytest.approx((1 - specificity(cm)) * 900, rel=1e-12, abs=1e-9)


def pair_count_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


@C5
def test_auc_equals_pair_counting_exactly():
    rng = np.random.default_rng(55)
    for _ in range(200):
        n = int(rng.integers(2, 80))
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 0, 1
        # Coarse scores so ties are common.
        scores = rng.integers(0, 8, n) / 8.0
        assert auc(scores, labels) == pair_count_auc(scores, labels)


# -- 6 ---------------------------------------------------------------------

SEED6 = 11
EPOCHS6 = 6


@C6
def test_focal_loss_auc_not_below_bce_on_separable_patient():
    start = time.perf_counter()
    gen = GeneratorConfig(seed=SEED6, imbalance_ratio=0.0826, preictal_shift=PreictalShift.preset("separable"))
    duration = duration_for_ratio(gen)
    rec = generate_recording(gen, "ecg", 1, duration)
    assert expected_ratio(duration, rec.seizure_onsets, gen.horizon_s, gen.exclusion_s) == pytest.approx(0.0826, abs=5e-4)
    windows = [SampleWindow(w.start_time, standardize(w.channels), w.label, gen.sample_rate_hz)
               for w in label_windows(rec, gen.horizon_s, gen.exclusion_s)]
    split = split_dataset(windows, SEED6)
    x = np.stack([w.channels for w in split.test])
    y = np.array([int(w.label) for w in split.test])
    spec = ModelSpec()
    tc = TrainConfig(max_epochs=EPOCHS6, seed=SEED6)
    focal = auc(predict_proba(train(spec, split, FocalLossConfig(), tc).params, x), y)
    bce = auc(predict_proba(train(spec, split, BCE, tc).params, x), y)
    elapsed = time.perf_counter() - start
    print(f"focal AUC {focal:.6f}  BCE AUC {bce:.6f}  {elapsed:.0f} s")
    assert focal >= bce
    assert focal >= 0.90
    assert elapsed < 15 * 60


# -- 7 ---------------------------------------------------------------------

@C7
def test_saturated_mac_drop_rate_and_goodput():
    start = time.perf_counter()
    sc = Scenario(mode="saturation", channel=ChannelModel(loss=0.005), frame_budget=100_000, seed=3,
                  network=NetworkConfig(phy=PhyConfig(slot_time_s=20e-6)))
    r = run_simulation(sc)
    elapsed = time.perf_counter() - start
    assert r.frames_sent >= 100_000
    assert abs(r.drop_rate - 0.005) <= 0.001
    assert r.aggregate_goodput_bps >= 19_800
    assert elapsed < 60.0


# -- 8 ---------------------------------------------------------------------

@C8
def test_and_fusion_reduces_false_alarms_over_a_day():
    start = time.perf_counter()
    sc = Scenario(classifiers={"ecg": OracleClassifier(0.94, 0.955, seed=1),
                               "ieeg": OracleClassifier(0.94, 0.955, seed=2)},
                  fusion=FusionConfig(time_window=1), duration_s=24 * 3600,
                  onsets=(20000.0, 50000.0, 80000.0), seed=5)
    r = run_simulation(sc)
    elapsed = time.perf_counter() - start
    single = {m: fpr_per_hour(cm) for m, cm in r.gateway_cm.items()}
    fused = fpr_per_hour(r.fused_cm)
    print(f"FPH ecg {single['ecg']:.2f}  ieeg {single['ieeg']:.2f}  AND {fused:.2f}")
    assert all(fused < v for v in single.values())
    assert r.fused_cm.fp <= min(cm.fp for cm in r.gateway_cm.values())
    assert elapsed < 120.0


# -- 9 ---------------------------------------------------------------------

def oracle_run_config(out):
    return config_from_dict({
        "seed": 21, "out": str(out), "patients": ["p1"],
        "simulation": {
            "duration_s": 7200,
            "labels": {"onsets": [4800.0]},
            "channel": {"loss": 0.02},
            "classifiers": {"ecg": {"type": "oracle", "sensitivity": 0.9, "specificity": 0.9},
                            "ieeg": {"type": "oracle", "sensitivity": 0.9, "specificity": 0.9, "channels": 3}},
        },
    })


@C9
def test_cmd_simulate_is_byte_identical(tmp_path):
    cmd_simulate(oracle_run_config(tmp_path / "a"))
    cmd_simulate(oracle_run_config(tmp_path / "b"))
    a = (tmp_path / "a" / "sim" / "trace.txt").read_bytes()
    b = (tmp_path / "b" / "sim" / "trace.txt").read_bytes()
    assert len(a) > 0 and a == b


# -- 10 --------------------------------------------------------------------

@C10
@pytest.mark.parametrize("seed,loss,rule", [(1, 0.0, "and"), (2, 0.005, "and"), (3, 0.05, "or"),
                                            (4, 0.2, "and"), (5, 0.005, "ecg"), (6, 0.005, "ieeg")])
def test_alert_latency_bounded(seed, loss, rule):
    sc = Scenario(classifiers={"ecg": OracleClassifier(0.9, 0.9, seed=seed),
                               "ieeg": OracleClassifier(0.9, 0.9, channels=3, seed=seed)},
                  fusion=FusionConfig(modality_rule=rule), channel=ChannelModel(loss=loss),
                  duration_s=4 * 3600, onsets=(7200.0, 12000.0), seed=seed)
    r = run_simulation(sc)
    assert r.alerts > 0
    latencies = []
    for line in r.trace:
        t, kind, _, _, d = parse_trace_line(line)
        if kind == "alert":
            latencies.append(t - (int(d["step"]) + 1) * sc.network.t_app)
    assert len(latencies) == r.alerts
    assert max(latencies) <= sc.network.t_app + 1e-9
    assert max(r.alert_latencies) <= 4.0
