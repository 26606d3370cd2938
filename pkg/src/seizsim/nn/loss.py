"""Focal loss for the binary preictal / interictal task.

For label 1 (preictal) the loss is ``-alpha * (1 - p)**gamma * log(p)``;
for label 0 it is ``-(1 - alpha) * p**gamma * log(1 - p)``.  Probabilities
are clamped to ``[EPS, 1 - EPS]`` before any logarithm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, NumericError

EPS = 1e-7


@dataclass(frozen=True)
class FocalLossConfig:
    alpha: float = 0.2
    gamma: float = 2.0

    def __post_init__(self):
        # alpha = 1 (all weight on preictal) is kept for the cross-entropy reduction.
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in (0, 1]")
        if self.gamma < 0:
            raise ConfigurationError("gamma must be non-negative")


# Plain binary cross-entropy expressed as a focal loss: gamma 0, equal weights.
# The loss is half of BCE; training only cares about it up to scale.
BCE = FocalLossConfig(alpha=0.5, gamma=0.0)


def _prep(p, y):
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    if np.isnan(p).any():
        raise NumericError("NaN probability passed to focal loss")
    return np.clip(p, EPS, 1 - EPS), y.astype(bool)


def _pow(base, expo):
    # 0 ** 0 is 1, which is what the gamma = 0 reduction needs.
    return np.ones_like(base) if expo == 0 else base ** expo


def focal_loss(p, y, cfg: FocalLossConfig = FocalLossConfig()):
    """Element-wise focal loss; returns a float for scalar input."""
    p, pos = _prep(p, y)
    a, g = cfg.alpha, cfg.gamma
    out = np.where(pos,
                   -a * _pow(1 - p, g) * np.log(p),
                   -(1 - a) * _pow(p, g) * np.log1p(-p))
    return float(out) if out.ndim == 0 else out


def focal_loss_grad(p, y, cfg: FocalLossConfig = FocalLossConfig()):
    """d(loss)/dp, element-wise."""
    p, pos = _prep(p, y)
    a, g = cfg.alpha, cfg.gamma
    if g == 0:
        pos_term = -a / p
        neg_term = (1 - a) / (1 - p)
    else:
        pos_term = -a * (-g * (1 - p) ** (g - 1) * np.log(p) + (1 - p) ** g / p)
        neg_term = -(1 - a) * (g * p ** (g - 1) * np.log1p(-p) - p ** g / (1 - p))
    out = np.where(pos, pos_term, neg_term)
    return float(out) if out.ndim == 0 else out


def focal_loss_grad_logit(p, y, cfg: FocalLossConfig = FocalLossConfig()):
    """d(loss)/dz for p = sigmoid(z), written without divisions by p or 1 - p."""
    p, pos = _prep(p, y)
    a, g = cfg.alpha, cfg.gamma
    pos_term = a * _pow(1 - p, g) * (g * p * np.log(p) - (1 - p))
    neg_term = (1 - a) * _pow(p, g) * (p - g * (1 - p) * np.log1p(-p))
    return np.where(pos, pos_term, neg_term)


def cross_entropy(p, y):
    """Standard binary cross-entropy with the same clamp."""
    p, pos = _prep(p, y)
    out = np.where(pos, -np.log(p), -np.log1p(-p))
    return float(out) if out.ndim == 0 else out
