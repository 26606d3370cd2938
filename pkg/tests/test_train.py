import numpy as np
import pytest

from seizsim.errors import TrainingError
from seizsim.metrics import accuracy, confusion_from_decisions
from seizsim.nn import ModelSpec, TrainConfig, init_params, predict_proba, train
from seizsim.nn.checkpoint import decode_checkpoint, encode_checkpoint
from seizsim.signals import (
    DatasetSplit,
    GeneratorConfig,
    PreictalShift,
    SampleWindow,
    generate_recording,
    label_windows,
    split_dataset,
    standardize,
)

FS = 64


def small_split(preset="separable", seed=0):
    cfg = GeneratorConfig(seed=seed, sample_rate_hz=FS, imbalance_ratio=0.233, horizon_s=400,
                          exclusion_s=100, preictal_shift=PreictalShift.preset(preset))
    rec = generate_recording(cfg, "ecg", 1, 2300)
    windows = [SampleWindow(w.start_time, standardize(w.channels), w.label, FS)
               for w in label_windows(rec, cfg.horizon_s, cfg.exclusion_s)]
    return split_dataset(windows, seed)


@pytest.fixture(scope="module")
def split():
    return small_split()


SPEC = ModelSpec(input_length=4 * FS)


def test_separable_set_reaches_high_test_accuracy(split):
    result = train(SPEC, split)
    x = np.stack([w.channels for w in split.test])
    y = np.array([int(w.label) for w in split.test])
    decisions = (predict_proba(result.params, x) >= 0.5).astype(int)
    assert accuracy(confusion_from_decisions(decisions, y)) >= 0.95
    assert result.best_epoch is not None
    best = min(result.curve, key=lambda r: r.val_loss)
    assert best.epoch == result.best_epoch


def test_zero_epochs_returns_initialisation(split):
    init = init_params(SPEC, 5, np.float32)
    result = train(SPEC, split, tc=TrainConfig(max_epochs=0), init=init)
    assert result.params.equals(init)
    assert result.curve == []


def test_same_seed_same_parameters(split):
    tc = TrainConfig(max_epochs=2, seed=3)
    a = train(SPEC, split, tc=tc)
    b = train(SPEC, split, tc=tc)
    assert encode_checkpoint(a.params) == encode_checkpoint(b.params)
    assert a.curve_csv() == b.curve_csv()


def test_early_stopping_respects_patience(split):
    result = train(SPEC, split, tc=TrainConfig(max_epochs=30, patience=1, learning_rate=0.05))
    assert len(result.curve) <= 30
    if len(result.curve) < 30:
        last_two = result.curve[-2:]
        assert last_two[-1].val_loss >= min(r.val_loss for r in result.curve[:-1])


def test_divergence_reports_epoch(split):
    bad = DatasetSplit(
        [SampleWindow(0.0, np.full((1, 4 * FS), np.nan, dtype=np.float32), w.label, FS) for w in split.train[:8]],
        split.validation, [])
    with pytest.raises(TrainingError) as err:
        train(SPEC, bad, tc=TrainConfig(max_epochs=3))
    assert err.value.epoch == 0


def test_curve_csv_has_one_row_per_epoch(split):
    result = train(SPEC, split, tc=TrainConfig(max_epochs=2))
    lines = result.curve_csv().strip().split("\n")
    assert lines[0] == "epoch,train_loss,val_loss,val_auc"
    assert len(lines) == 3


def test_trained_params_survive_checkpoint(split):
    result = train(SPEC, split, tc=TrainConfig(max_epochs=1))
    back = decode_checkpoint(encode_checkpoint(result.params))
    assert back.equals(result.params)
