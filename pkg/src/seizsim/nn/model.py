"""1-D CNN classifier written directly against numpy.

Stack: per-channel batch norm on the raw input, convolution blocks
(same-padded conv, ReLU, max-pool), flatten, dense layers with ReLU on all
but the last, sigmoid output.  Inputs are (batch, channels, time); layers run channels-last internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import ConfigurationError, NumericError, ShapeError
from .loss import EPS, FocalLossConfig, focal_loss, focal_loss_grad_logit


@dataclass(frozen=True)
class ConvBlock:
    filters: int
    kernel_size: int
    pool_width: int = 2


REFERENCE_BLOCKS = (ConvBlock(16, 7), ConvBlock(32, 5), ConvBlock(32, 5), ConvBlock(64, 3), ConvBlock(64, 3))
REFERENCE_DENSE = (256, 64, 16, 1)


@dataclass(frozen=True)
class ModelSpec:
    input_channels: int = 1
    input_length: int = 1024
    conv_blocks: tuple = REFERENCE_BLOCKS
    dense_widths: tuple = REFERENCE_DENSE
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "conv_blocks", tuple(
            b if isinstance(b, ConvBlock) else ConvBlock(**b) for b in self.conv_blocks))
        object.__setattr__(self, "dense_widths", tuple(int(w) for w in self.dense_widths))
        if self.input_channels < 1 or self.input_length < 1:
            raise ConfigurationError("input_channels and input_length must be positive")
        if not self.conv_blocks or not self.dense_widths:
            raise ConfigurationError("need at least one conv block and one dense layer")
        if self.dense_widths[-1] != 1:
            raise ConfigurationError("the last dense layer must have a single unit")
        length = self.input_length
        for i, b in enumerate(self.conv_blocks):
            if b.kernel_size % 2 == 0:
                raise ConfigurationError(f"conv block {i}: kernel size must be odd for same padding")
            if length % b.pool_width:
                raise ConfigurationError(
                    f"input_length {self.input_length} is not divisible by the pooling chain")
            length //= b.pool_width

    @property
    def is_reference(self) -> bool:
        """True for the 5 conv block / 4 dense layer architecture."""
        return len(self.conv_blocks) == 5 and len(self.dense_widths) == 4

    def block_lengths(self) -> list[int]:
        """Sequence length after each conv block."""
        out, length = [], self.input_length
        for b in self.conv_blocks:
            length //= b.pool_width
            out.append(length)
        return out

    @property
    def flat_size(self) -> int:
        return self.conv_blocks[-1].filters * self.block_lengths()[-1]

    def param_shapes(self) -> dict[str, tuple]:
        c = self.input_channels
        shapes = {"bn.gamma": (c,), "bn.beta": (c,), "bn.running_mean": (c,), "bn.running_var": (c,)}
        cin = c
        for i, b in enumerate(self.conv_blocks):
            shapes[f"conv{i}.W"] = (b.filters, cin, b.kernel_size)
            shapes[f"conv{i}.b"] = (b.filters,)
            cin = b.filters
        fan = self.flat_size
        for j, w in enumerate(self.dense_widths):
            shapes[f"dense{j}.W"] = (fan, w)
            shapes[f"dense{j}.b"] = (w,)
            fan = w
        return shapes

    @classmethod
    def miniature(cls, input_channels=1) -> "ModelSpec":
        """Two-block, 8-sample network for gradient checks."""
        return cls(input_channels, 8, (ConvBlock(3, 3), ConvBlock(4, 3)), (5, 4, 3, 1))


RUNNING_KEYS = ("bn.running_mean", "bn.running_var")


@dataclass(frozen=True)
class ModelParams:
    spec: ModelSpec
    arrays: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = self.spec.param_shapes()
        if set(shapes) != set(self.arrays):
            raise ConfigurationError("parameter names do not match the model spec")
        for k, s in shapes.items():
            if tuple(self.arrays[k].shape) != s:
                raise ShapeError(k, s, tuple(self.arrays[k].shape))
        if np.any(self.arrays["bn.running_var"] <= 0):
            raise ConfigurationError("batch-norm running variance must be positive")

    def __getitem__(self, key):
        return self.arrays[key]

    def trainable(self) -> list[str]:
        return [k for k in self.spec.param_shapes() if k not in RUNNING_KEYS]

    def frozen(self) -> "ModelParams":
        """Read-only deep copy."""
        arrays = {}
        for k, v in self.arrays.items():
            a = np.array(v, copy=True)
            a.setflags(write=False)
            arrays[k] = a
        return ModelParams(self.spec, arrays)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.spec, {k: np.asarray(v, dtype=dtype).copy() for k, v in self.arrays.items()})

    def replace(self, **updates) -> "ModelParams":
        arrays = dict(self.arrays)
        arrays.update(updates)
        return ModelParams(self.spec, arrays)

    def flat(self) -> np.ndarray:
        return np.concatenate([np.ravel(self.arrays[k]) for k in self.spec.param_shapes()])

    def equals(self, other: "ModelParams") -> bool:
        return self.spec == other.spec and all(
            np.array_equal(self.arrays[k], other.arrays[k]) for k in self.arrays)


def init_params(spec: ModelSpec, seed: int = 0, dtype=np.float64) -> ModelParams:
    """Fan-in scaled uniform weights, zero biases, identity batch norm."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1717]))
    arrays = {}
    last_dense = f"dense{len(spec.dense_widths) - 1}.W"
    for name, shape in spec.param_shapes().items():
        if name == "bn.gamma" or name == "bn.running_var":
            arrays[name] = np.ones(shape, dtype=dtype)
        elif name.endswith(".W"):
            fan_in = shape[0] if name.startswith("dense") else shape[1] * shape[2]
            gain = 3.0 if name == last_dense else 6.0
            limit = np.sqrt(gain / fan_in)
            arrays[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
        else:
            arrays[name] = np.zeros(shape, dtype=dtype)
    return ModelParams(spec, arrays)


def zero_params(spec: ModelSpec, dtype=np.float64) -> ModelParams:
    p = init_params(spec, 0, dtype)
    arrays = {k: (v if k.startswith("bn.") else np.zeros_like(v)) for k, v in p.arrays.items()}
    return ModelParams(spec, arrays)


# --------------------------------------------------------------------------
# layers
# --------------------------------------------------------------------------

def _conv_forward(x, W, b):
    # x is channels-last (N, L, Cin); im2col rows are (sample, position).
    n, length, cin = x.shape
    k = W.shape[2]
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    cols = sliding_window_view(xp, k, axis=1).reshape(n * length, cin * k)
    out = cols @ W.reshape(W.shape[0], -1).T + b
    return out.reshape(n, length, -1), cols


def _conv_backward(dout, cols, W):
    n, length, cout = dout.shape
    cin, k = W.shape[1], W.shape[2]
    pad = (k - 1) // 2
    d2 = dout.reshape(n * length, cout)
    db = d2.sum(axis=0)
    dW = (d2.T @ cols).reshape(W.shape)
    dcols = (d2 @ W.reshape(cout, -1)).reshape(n, length, cin, k)
    dxp = np.zeros((n, length + k - 1, cin), dtype=dout.dtype)
    for j in range(k):
        dxp[:, j:j + length, :] += dcols[:, :, :, j]
    return dxp[:, pad:pad + length, :], dW, db


def _pool_forward(a, width):
    n, length, c = a.shape
    r = a.reshape(n, length // width, width, c)
    if width == 2:
        first = r[:, :, 0, :] >= r[:, :, 1, :]
        return np.where(first, r[:, :, 0, :], r[:, :, 1, :]), first
    idx = r.argmax(axis=2)
    return np.take_along_axis(r, idx[:, :, None, :], axis=2)[:, :, 0, :], idx


def _pool_backward(dout, idx, width):
    n, m, c = dout.shape
    if width == 2:
        d = np.empty((n, m, 2, c), dtype=dout.dtype)
        d[:, :, 0, :] = np.where(idx, dout, 0)
        d[:, :, 1, :] = np.where(idx, 0, dout)
        return d.reshape(n, 2 * m, c)
    d = np.zeros((n, m, width, c), dtype=dout.dtype)
    np.put_along_axis(d, idx[:, :, None, :], dout[:, :, None, :], axis=2)
    return d.reshape(n, m * width, c)


def _check_input(spec: ModelSpec, x):
    if x.ndim != 3 or x.shape[1:] != (spec.input_channels, spec.input_length):
        raise ShapeError("input", ("N", spec.input_channels, spec.input_length), tuple(x.shape))


def _forward(params: ModelParams, x, bn_mode: str, keep: bool):
    spec = params.spec
    x = np.asarray(x, dtype=params["conv0.W"].dtype)
    if x.ndim == 2:
        x = x[None]
    _check_input(spec, x)
    cache = {}
    eps = spec.bn_eps
    x = x.transpose(0, 2, 1)  # channels-last internally
    if bn_mode == "batch":
        mean = x.mean(axis=(0, 1))
        var = x.var(axis=(0, 1))
    elif bn_mode == "running":
        mean, var = params["bn.running_mean"], params["bn.running_var"]
    else:
        raise ConfigurationError(f"unknown batch-norm mode {bn_mode!r}")
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv
    h = params["bn.gamma"] * xhat + params["bn.beta"]
    if keep:
        cache["bn"] = (xhat, inv, mean, var)
    for i, blk in enumerate(spec.conv_blocks):
        z, cols = _conv_forward(h, params[f"conv{i}.W"], params[f"conv{i}.b"])
        a = np.maximum(z, 0)
        h, idx = _pool_forward(a, blk.pool_width)
        if keep:
            cache[f"conv{i}"] = (cols, z > 0, idx)
    n = h.shape[0]
    if keep:
        cache["flat_shape"] = h.shape
    h = h.reshape(n, -1)
    last = len(spec.dense_widths) - 1
    for j in range(last + 1):
        inp = h
        z = inp @ params[f"dense{j}.W"] + params[f"dense{j}.b"]
        h = np.maximum(z, 0) if j < last else z
        if keep:
            cache[f"dense{j}"] = (inp, z > 0)
    logits = h[:, 0]
    return logits, cache


def forward_logits(params: ModelParams, x, bn_mode: str = "running") -> np.ndarray:
    return _forward(params, x, bn_mode, keep=False)[0]


def predict_proba(params: ModelParams, windows, batch_size: int = 256) -> np.ndarray:
    """Preictal probability per window, inference-mode batch norm.

    Accepts an array (n, channels, length) or a sequence of SampleWindow.
    """
    if isinstance(windows, np.ndarray):
        x = windows
    else:
        windows = list(windows)
        if not windows:
            return np.zeros(0)
        x = np.stack([w.channels for w in windows])
    if x.size == 0:
        return np.zeros(0)
    out = [expit(forward_logits(params, x[i:i + batch_size]))
           for i in range(0, x.shape[0], batch_size)]
    return np.concatenate(out).astype(np.float64)


def forward(params: ModelParams, window) -> float:
    """Preictal probability for one window (SampleWindow or (C, L) array)."""
    x = getattr(window, "channels", window)
    x = np.asarray(x)
    if x.ndim != 2:
        raise ShapeError("input", (params.spec.input_channels, params.spec.input_length), tuple(x.shape))
    return float(predict_proba(params, x[None])[0])


def loss_and_grads(params: ModelParams, x, y, cfg: FocalLossConfig = FocalLossConfig(),
                   bn_mode: str = "batch", reduction: str = "mean"):
    """Focal loss over a batch and its gradient for every trainable parameter.

    Returns ``(loss, grads, batch_stats)``; ``batch_stats`` holds the input
    mean and variance used by batch norm (for running-stat updates).
    """
    spec = params.spec
    y = np.asarray(y).astype(np.int8).ravel()
    logits, cache = _forward(params, x, bn_mode, keep=True)
    if y.size != logits.size:
        raise ShapeError("labels", (logits.size,), (y.size,))
    if y.size == 0:
        raise ShapeError("input", ("N>0",), (0,))
    p = expit(logits)
    losses = focal_loss(p, y, cfg)
    scale = 1.0 / y.size if reduction == "mean" else 1.0
    loss = float(np.sum(losses) * scale)
    dz = (focal_loss_grad_logit(p, y, cfg) * scale).astype(logits.dtype)

    grads = {}
    d = dz[:, None]
    for j in reversed(range(len(spec.dense_widths))):
        inp, active = cache[f"dense{j}"]
        if j < len(spec.dense_widths) - 1:
            d = d * active
        grads[f"dense{j}.W"] = inp.T @ d
        grads[f"dense{j}.b"] = d.sum(axis=0)
        d = d @ params[f"dense{j}.W"].T
    d = d.reshape(cache["flat_shape"])
    for i in reversed(range(len(spec.conv_blocks))):
        cols, active, idx = cache[f"conv{i}"]
        d = _pool_backward(d, idx, spec.conv_blocks[i].pool_width) * active
        d, grads[f"conv{i}.W"], grads[f"conv{i}.b"] = _conv_backward(d, cols, params[f"conv{i}.W"])
    xhat, inv, mean, var = cache["bn"]
    grads["bn.gamma"] = (d * xhat).sum(axis=(0, 1))
    grads["bn.beta"] = d.sum(axis=(0, 1))
    # Gradient w.r.t. the raw input is not needed; batch-norm is the first layer.

    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in layer {name.split('.')[0]!r} ({name})")
    return loss, grads, (mean, var)


def backward(params: ModelParams, x, y, cfg: FocalLossConfig = FocalLossConfig(),
             bn_mode: str = "batch", reduction: str = "mean") -> dict:
    """Gradient set for a batch; see :func:`loss_and_grads`."""
    return loss_and_grads(params, x, y, cfg, bn_mode, reduction)[1]


def batch_loss(params: ModelParams, x, y, cfg: FocalLossConfig = FocalLossConfig(),
               bn_mode: str = "batch", reduction: str = "mean") -> float:
    logits = forward_logits(params, x, bn_mode)
    losses = focal_loss(expit(logits), np.asarray(y).ravel(), cfg)
    total = float(np.sum(losses))
    return total / np.size(losses) if reduction == "mean" else total


__all__ = [
    "ConvBlock", "ModelSpec", "ModelParams", "init_params", "zero_params", "forward",
    "forward_logits", "predict_proba", "backward", "loss_and_grads", "batch_loss", "EPS",
]
