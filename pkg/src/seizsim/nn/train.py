"""Per-patient training loop with early stopping on validation loss."""

from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, NumericError, TrainingError, UndefinedMetricError
from ..metrics import auc
from ..signals import DatasetSplit, stack_windows
from .loss import FocalLossConfig
from .model import ModelParams, ModelSpec, batch_loss, init_params, loss_and_grads, predict_proba

log = logging.getLogger(__name__)


class Optimizer(str, enum.Enum):
    SGD = "sgd"
    MOMENTUM = "momentum"
    ADAM = "adam"


@dataclass(frozen=True)
class TrainConfig:
    optimizer: Optimizer = Optimizer.ADAM
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 30
    patience: int = 10
    seed: int = 0
    momentum: float = 0.9
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1")
        if self.max_epochs < 0 or self.patience < 1:
            raise ConfigurationError("max_epochs must be >= 0 and patience >= 1")


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, arrays, grads):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k, g in grads.items():
            m = self.m.get(k, 0) * self.b1 + (1 - self.b1) * g
            v = self.v.get(k, 0) * self.b2 + (1 - self.b2) * g * g
            self.m[k], self.v[k] = m, v
            arrays[k] = arrays[k] - (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(arrays[k].dtype)


class _SGD:
    def __init__(self, lr, momentum=0.0):
        self.lr, self.mu, self.vel = lr, momentum, {}

    def step(self, arrays, grads):
        for k, g in grads.items():
            v = self.mu * self.vel.get(k, 0) + g
            self.vel[k] = v
            arrays[k] = arrays[k] - (self.lr * v).astype(arrays[k].dtype)


def _make_optimizer(tc: TrainConfig):
    if tc.optimizer is Optimizer.ADAM:
        return _Adam(tc.learning_rate)
    if tc.optimizer is Optimizer.MOMENTUM:
        return _SGD(tc.learning_rate, tc.momentum)
    return _SGD(tc.learning_rate)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_auc: float | None


@dataclass
class TrainResult:
    params: ModelParams
    curve: list = field(default_factory=list)
    best_epoch: int | None = None

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "val_auc"])
        for r in self.curve:
            w.writerow([r.epoch, f"{r.train_loss:.8f}", f"{r.val_loss:.8f}",
                        "" if r.val_auc is None else f"{r.val_auc:.6f}"])
        return buf.getvalue()


def _as_arrays(windows, spec):
    x, y = stack_windows(windows)
    if x.size == 0:
        return np.zeros((0, spec.input_channels, spec.input_length)), y
    return x, y


def train(spec: ModelSpec, split: DatasetSplit, fl: FocalLossConfig = FocalLossConfig(),
          tc: TrainConfig = TrainConfig(), init: ModelParams | None = None) -> TrainResult:
    """Mini-batch training; returns the parameters of the best validation epoch."""
    dtype = np.dtype(tc.dtype)
    params = (init or init_params(spec, tc.seed)).astype(dtype)
    x_tr, y_tr = _as_arrays(split.train, spec)
    x_va, y_va = _as_arrays(split.validation, spec)
    x_tr = x_tr.astype(dtype, copy=False)
    x_va = x_va.astype(dtype, copy=False)
    if tc.max_epochs == 0:
        return TrainResult(params.frozen(), [], None)
    if x_tr.shape[0] == 0:
        raise ConfigurationError("training split is empty")

    rng = np.random.default_rng(np.random.SeedSequence([tc.seed, 0x7EA1]))
    opt = _make_optimizer(tc)
    arrays = {k: v.copy() for k, v in params.arrays.items()}
    momentum = spec.bn_momentum
    best, best_loss, best_epoch, stale = params.frozen(), np.inf, None, 0
    curve = []

    for epoch in range(tc.max_epochs):
        order = rng.permutation(x_tr.shape[0])
        total, seen = 0.0, 0
        for start in range(0, order.size, tc.batch_size):
            idx = order[start:start + tc.batch_size]
            current = ModelParams(spec, arrays)
            try:
                loss, grads, (mean, var) = loss_and_grads(current, x_tr[idx], y_tr[idx], fl, "batch")
            except NumericError as exc:
                raise TrainingError(f"training diverged: {exc}", epoch) from exc
            if not np.isfinite(loss):
                raise TrainingError("training loss diverged", epoch)
            opt.step(arrays, grads)
            arrays["bn.running_mean"] = (momentum * arrays["bn.running_mean"] + (1 - momentum) * mean).astype(dtype)
            arrays["bn.running_var"] = (momentum * arrays["bn.running_var"] + (1 - momentum) * var).astype(dtype)
            total += loss * idx.size
            seen += idx.size
        current = ModelParams(spec, arrays)
        train_loss = total / seen
        if x_va.shape[0]:
            try:
                val_loss = batch_loss(current, x_va, y_va, fl, bn_mode="running")
            except NumericError as exc:
                raise TrainingError(f"validation diverged: {exc}", epoch) from exc
            try:
                val_auc = auc(predict_proba(current, x_va), y_va)
            except UndefinedMetricError:
                val_auc = None
        else:
            val_loss, val_auc = train_loss, None
        if not np.isfinite(val_loss):
            raise TrainingError("validation loss diverged", epoch)
        curve.append(EpochRecord(epoch, float(train_loss), float(val_loss), val_auc))
        log.info("epoch %d train %.5f val %.5f auc %s", epoch, train_loss, val_loss, val_auc)
        if val_loss < best_loss:
            best, best_loss, best_epoch, stale = current.frozen(), val_loss, epoch, 0
        else:
            stale += 1
            if stale >= tc.patience:
                break
    return TrainResult(best, curve, best_epoch)
