# %% [markdown]
# # Training the 1-D CNN
#
# The network is written in plain numpy:
#
# - batch-norm on the input
# - five conv/ReLU/max-pool blocks
# - four dense layers
#
# It trains with Adam on mini-batches. To stay fast, this demo uses 64 Hz
# windows, so each input is 256 samples instead of 1024.

# %%
import time

import numpy as np

from seizsim.metrics import auc, confusion_from_decisions, sensitivity, specificity
from seizsim.nn import BCE, FocalLossConfig, ModelSpec, TrainConfig, predict_proba, train
from seizsim.signals import (
    GeneratorConfig, PreictalShift, SampleWindow, duration_for_ratio,
    generate_recording, label_windows, split_dataset, standardize,
)

FS = 64
gen = GeneratorConfig(seed=4, sample_rate_hz=FS, imbalance_ratio=0.0826,
                      preictal_shift=PreictalShift.preset("moderate"))
rec = generate_recording(gen, "ecg", 1, duration_for_ratio(gen))
windows = [SampleWindow(w.start_time, standardize(w.channels), w.label, FS) for w in label_windows(rec)]
split = split_dataset(windows, seed=4)
print(len(split.train), "train /", len(split.validation), "val /", len(split.test), "test windows")

# %%
spec = ModelSpec(input_length=4 * FS)
tc = TrainConfig(max_epochs=4, seed=4)
x = np.stack([w.channels for w in split.test])
y = np.array([int(w.label) for w in split.test])

for name, loss in (("focal", FocalLossConfig()), ("cross-entropy", BCE)):
    t0 = time.perf_counter()
    result = train(spec, split, loss, tc)
    p = predict_proba(result.params, x)
    cm = confusion_from_decisions(p >= 0.5, y)
    print(f"{name:>13}: AUC {auc(p, y):.4f}  sens {sensitivity(cm):.3f}  spec {specificity(cm):.3f}"
          f"  ({time.perf_counter() - t0:.0f} s)")
    for r in result.curve:
        print(f"    epoch {r.epoch}  train {r.train_loss:.4f}  val {r.val_loss:.4f}  val AUC {r.val_auc:.4f}")
