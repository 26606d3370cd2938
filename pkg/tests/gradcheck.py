"""Finite-difference oracle for the analytic backward pass.

The numeric side runs through ``reference_loss``: a separate, loop-per-tap
re-implementation of the network evaluated in long double. Differencing in
extended precision keeps round-off far below the tolerance even for
coordinates whose gradient is ~1e-8, and the second code path cross-checks
the vectorised forward pass.
"""

import numpy as np

from seizsim.nn import FocalLossConfig, ModelSpec, init_params
from seizsim.nn.model import loss_and_grads

LD = np.longdouble


def random_params(spec: ModelSpec, rng):
    """All trainable entries random (biases too) so no ReLU sits on its kink."""
    p = init_params(spec, int(rng.integers(2**31)))
    arrays = dict(p.arrays)
    for name in p.trainable():
        arrays[name] = rng.normal(0.0, 0.6, size=arrays[name].shape)
    arrays["bn.running_mean"] = rng.normal(0.0, 0.3, size=arrays["bn.running_mean"].shape)
    arrays["bn.running_var"] = rng.uniform(0.5, 2.0, size=arrays["bn.running_var"].shape)
    return p.replace(**arrays)


def reference_loss(spec: ModelSpec, arrays: dict, x, y, cfg: FocalLossConfig, bn_mode: str) -> LD:
    a = {k: np.asarray(v, dtype=LD) for k, v in arrays.items()}
    x = np.asarray(x, dtype=LD)  # (N, C, L)
    if bn_mode == "batch":
        mean, var = x.mean(axis=(0, 2)), x.var(axis=(0, 2))
    else:
        mean, var = a["bn.running_mean"], a["bn.running_var"]
    h = (x - mean[None, :, None]) / np.sqrt(var + LD(spec.bn_eps))[None, :, None]
    h = h * a["bn.gamma"][None, :, None] + a["bn.beta"][None, :, None]
    for i, blk in enumerate(spec.conv_blocks):
        W, b = a[f"conv{i}.W"], a[f"conv{i}.b"]
        k = blk.kernel_size
        pad = (k - 1) // 2
        n, _, length = h.shape
        hp = np.concatenate([np.zeros((n, h.shape[1], pad), LD), h, np.zeros((n, h.shape[1], pad), LD)], axis=2)
        z = np.zeros((n, W.shape[0], length), LD) + b[None, :, None]
        for j in range(k):
            z += np.einsum("fc,nct->nft", W[:, :, j], hp[:, :, j:j + length])
        z = np.maximum(z, 0)
        z = z.reshape(n, W.shape[0], length // blk.pool_width, blk.pool_width).max(axis=3)
        h = z
    h = h.transpose(0, 2, 1).reshape(h.shape[0], -1)  # position-major, channels innermost
    last = len(spec.dense_widths) - 1
    for j in range(last + 1):
        h = h @ a[f"dense{j}.W"] + a[f"dense{j}.b"]
        if j < last:
            h = np.maximum(h, 0)
    p = 1 / (1 + np.exp(-h[:, 0]))
    eps = LD(1e-7)
    p = np.clip(p, eps, 1 - eps)
    y = np.asarray(y).astype(bool)
    al, g = LD(cfg.alpha), LD(cfg.gamma)
    loss = np.where(y, -al * (1 - p) ** g * np.log(p), -(1 - al) * p ** g * np.log1p(-p))
    return loss.mean()


def max_relative_error(params, x, y, cfg=FocalLossConfig(), bn_mode="running", h=1e-6, floor=1e-7):
    """Largest per-coordinate |analytic - numeric| / max(|analytic|, |numeric|, floor)."""
    _, grads, _ = loss_and_grads(params, x, y, cfg, bn_mode)
    spec = params.spec
    worst = 0.0
    for name in params.trainable():
        base = np.asarray(params.arrays[name], dtype=LD)
        for idx in np.ndindex(base.shape):
            plus, minus = base.copy(), base.copy()
            plus[idx] += LD(h)
            minus[idx] -= LD(h)
            lp = reference_loss(spec, {**params.arrays, name: plus}, x, y, cfg, bn_mode)
            lm = reference_loss(spec, {**params.arrays, name: minus}, x, y, cfg, bn_mode)
            numeric = float((lp - lm) / (2 * LD(h)))
            analytic = float(grads[name][idx])
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
            worst = max(worst, err)
    return worst
