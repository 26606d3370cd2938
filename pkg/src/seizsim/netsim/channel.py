"""Abstract through-tissue ultrasonic link: propagation delay plus Bernoulli loss."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError

SOFT_TISSUE_SOUND_SPEED = 1540.0  # m/s


@dataclass(frozen=True)
class ChannelModel:
    sound_speed: float = SOFT_TISSUE_SOUND_SPEED
    loss: float = 0.005
    link_loss: dict = field(default_factory=dict)  # (src, dst) -> loss override
    jitter_s: float = 0.0
    chip_error_rate: float = 0.0

    def __post_init__(self):
        for p in (self.loss, *self.link_loss.values(), self.chip_error_rate):
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError("loss probabilities must lie in [0, 1]")
        if self.sound_speed <= 0 or self.jitter_s < 0:
            raise ConfigurationError("sound speed must be positive and jitter non-negative")

    def loss_for(self, src: str, dst: str) -> float:
        return self.link_loss.get((src, dst), self.loss)

    def delay(self, a, b) -> float:
        return distance(a, b) / self.sound_speed


def distance(a, b) -> float:
    return math.dist(tuple(a), tuple(b))


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    src_pos: tuple
    dst_pos: tuple


@dataclass(frozen=True)
class Delivery:
    delivered: bool
    rx_time: float  # arrival end when delivered, transmission end when dropped
    arrival_start: float


def transmit(frame, link: Link, channel: ChannelModel, rng: np.random.Generator) -> Delivery:
    """Draw the fate of one frame on one link. Uses exactly two rng draws."""
    lost = rng.random() < channel.loss_for(link.src, link.dst)
    jitter = rng.uniform(0.0, channel.jitter_s)
    delay = channel.delay(link.src_pos, link.dst_pos) + jitter
    if lost:
        return Delivery(False, frame.tx_time + frame.duration, frame.tx_time + delay)
    return Delivery(True, frame.tx_time + delay + frame.duration, frame.tx_time + delay)
