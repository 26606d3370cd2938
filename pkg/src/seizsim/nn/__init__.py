"""Numpy 1-D CNN, focal loss and training loop."""

from .checkpoint import load_checkpoint, save_checkpoint
from .loss import BCE, EPS, FocalLossConfig, cross_entropy, focal_loss, focal_loss_grad
from .model import (
    ConvBlock,
    ModelParams,
    ModelSpec,
    backward,
    forward,
    init_params,
    loss_and_grads,
    predict_proba,
    zero_params,
)
from .train import EpochRecord, Optimizer, TrainConfig, TrainResult, train

__all__ = [
    "BCE", "EPS", "ConvBlock", "EpochRecord", "FocalLossConfig", "ModelParams", "ModelSpec",
    "Optimizer", "TrainConfig", "TrainResult", "backward", "cross_entropy", "focal_loss",
    "focal_loss_grad", "forward", "init_params", "load_checkpoint", "loss_and_grads",
    "predict_proba", "save_checkpoint", "train", "zero_params",
]
