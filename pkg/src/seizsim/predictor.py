"""Turn per-window probabilities into alarm decisions.

Pipeline per 4 s step: threshold each channel, majority across channels,
push into a sliding buffer of the last ``time_window`` decisions, majority
over time, then combine the ECG and iEEG decisions at the gateway.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ConfigurationError


class ModalityRule(str, enum.Enum):
    AND = "and"
    OR = "or"
    ECG_ONLY = "ecg"
    IEEG_ONLY = "ieeg"


@dataclass(frozen=True)
class FusionConfig:
    threshold: float = 0.5
    time_window: int = 15
    channel_rule: str = "majority"
    modality_rule: ModalityRule = ModalityRule.AND

    def __post_init__(self):
        if self.time_window < 1 or self.time_window % 2 == 0:
            raise ConfigurationError("time_window must be a positive odd integer")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError("threshold must lie in [0, 1]")
        if self.channel_rule != "majority":
            raise ConfigurationError(f"unknown channel rule {self.channel_rule!r}")
        object.__setattr__(self, "modality_rule", ModalityRule(self.modality_rule))


class DecisionBuffer:
    """Sliding store of the most recent binary decisions, oldest first."""

    def __init__(self, capacity: int = 15):
        if capacity < 1:
            raise ConfigurationError("capacity must be positive")
        self.capacity = capacity
        self._items: deque[int] = deque(maxlen=capacity)

    def push(self, decision) -> None:
        self._items.append(1 if decision else 0)

    @property
    def fill_count(self) -> int:
        return len(self._items)

    @property
    def contents(self) -> tuple[int, ...]:
        return tuple(self._items)

    @property
    def full(self) -> bool:
        return len(self._items) == self.capacity

    def ones(self) -> int:
        return sum(self._items)

    def __len__(self):
        return len(self._items)


def threshold_decision(p: float, threshold: float = 0.5) -> int:
    return int(p >= threshold)


def time_vote(buf: DecisionBuffer) -> int:
    # Interictal until the buffer has filled once.
    if not buf.full:
        return 0
    return int(buf.ones() > buf.capacity // 2)


def channel_vote(decisions) -> int:
    """Majority across channels; an even split resolves to Preictal."""
    d = list(decisions)
    if not d:
        raise ConfigurationError("channel_vote needs at least one channel")
    n = len(d)
    ones = sum(1 for x in d if x)
    return int(ones >= math.ceil(n / 2))


def fuse_modalities(ecg_decision: int, ieeg_decision: int, rule=ModalityRule.AND) -> int:
    rule = ModalityRule(rule)
    if rule is ModalityRule.AND:
        return int(bool(ecg_decision) and bool(ieeg_decision))
    if rule is ModalityRule.OR:
        return int(bool(ecg_decision) or bool(ieeg_decision))
    if rule is ModalityRule.ECG_ONLY:
        return int(bool(ecg_decision))
    return int(bool(ieeg_decision))


@dataclass(frozen=True)
class StepDecision:
    thresholded: tuple[int, ...]
    channel_vote: int
    time_vote: int


class StreamingVoter:
    """Per-node voting state: one buffer fed by channel-voted decisions."""

    def __init__(self, cfg: FusionConfig | None = None):
        self.cfg = cfg or FusionConfig()
        self.buffer = DecisionBuffer(self.cfg.time_window)

    def step(self, channel_probs) -> StepDecision:
        th = tuple(threshold_decision(p, self.cfg.threshold) for p in np.atleast_1d(channel_probs))
        cv = channel_vote(th)
        self.buffer.push(cv)
        return StepDecision(th, cv, time_vote(self.buffer))


def _as_streams(streams) -> np.ndarray:
    arr = np.asarray(streams, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise AlignmentError("expected a (channels, steps) array of probabilities")
    return arr


def ieeg_decide(channel_streams, cfg: FusionConfig | None = None) -> np.ndarray:
    """Channel-then-time voting over aligned per-channel probability streams.

    ``channel_streams`` is a sequence of equal-length per-channel sequences.
    Returns one decision per step.
    """
    streams = list(channel_streams) if not isinstance(channel_streams, np.ndarray) else channel_streams
    lengths = {len(s) for s in streams}
    if len(lengths) > 1:
        raise AlignmentError(f"channel streams have different lengths: {sorted(lengths)}")
    arr = _as_streams(streams)
    voter = StreamingVoter(cfg)
    return np.array([voter.step(arr[:, t]).time_vote for t in range(arr.shape[1])], dtype=np.int8)


def ecg_decide(probs, cfg: FusionConfig | None = None) -> np.ndarray:
    """Single-channel path: threshold then time vote."""
    return ieeg_decide([np.asarray(probs, dtype=float)], cfg)


def fuse_streams(ecg_decisions, ieeg_decisions, rule=ModalityRule.AND) -> np.ndarray:
    e = np.asarray(ecg_decisions)
    i = np.asarray(ieeg_decisions)
    if e.shape != i.shape:
        raise AlignmentError(f"ECG stream has {e.size} steps, iEEG stream {i.size}")
    return np.array([fuse_modalities(a, b, rule) for a, b in zip(e, i)], dtype=np.int8)


TRACE_HEADER = "t_s,modality,raw_p,thresholded,channel_vote,time_vote,fused"


def trace_line(t_s, modality, raw_p, thresholded, channel_vote_, time_vote_, fused) -> str:
    """One decision-trace row. Multi-channel values are joined with ';'."""

    def fmt(v):
        if isinstance(v, (list, tuple, np.ndarray)):
            return ";".join(fmt(x) for x in v)
        if isinstance(v, float):
            return f"{v:.6f}"
        return str(v)

    return ",".join(fmt(v) for v in (float(t_s), modality, raw_p, thresholded, channel_vote_, time_vote_, fused))


def decision_trace(ecg_probs, ieeg_streams, cfg: FusionConfig | None = None, t_app: float = 4.0) -> list[str]:
    """Full decision trace for two aligned modality streams, header first."""
    cfg = cfg or FusionConfig()
    ecg = np.asarray(ecg_probs, dtype=float)
    ieeg = _as_streams(ieeg_streams)
    if ieeg.shape[1] != ecg.size:
        raise AlignmentError(f"ECG stream has {ecg.size} steps, iEEG stream {ieeg.shape[1]}")
    ev, iv = StreamingVoter(cfg), StreamingVoter(cfg)
    lines = [TRACE_HEADER]
    for t in range(ecg.size):
        e = ev.step([ecg[t]])
        i = iv.step(ieeg[:, t])
        fused = fuse_modalities(e.time_vote, i.time_vote, cfg.modality_rule)
        t_s = (t + 1) * t_app
        lines.append(trace_line(t_s, "ecg", float(ecg[t]), e.thresholded, e.channel_vote, e.time_vote, fused))
        lines.append(trace_line(t_s, "ieeg", tuple(float(x) for x in ieeg[:, t]), i.thresholded,
                                i.channel_vote, i.time_vote, fused))
    return lines
