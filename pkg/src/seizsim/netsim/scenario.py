"""Scenario description: nodes, geometry, link and PHY parameters, traffic."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..errors import ConfigurationError, ScenarioError
from ..predictor import FusionConfig
from .channel import ChannelModel
from .phy import PhyConfig


class NodeKind(str, enum.Enum):
    IEEG_CLASSIFIER = "IEEG_CLASSIFIER"
    ECG_CLASSIFIER = "ECG_CLASSIFIER"
    GATEWAY = "GATEWAY"
    DBS = "DBS"


@dataclass(frozen=True)
class NodeConfig:
    id: str
    kind: NodeKind
    position: tuple = (0.0, 0.0, 0.0)
    # iEEG only: the over-the-skin controller that relays the implant's results.
    controller_position: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", NodeKind(self.kind))
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if self.controller_position is not None:
            object.__setattr__(self, "controller_position", tuple(float(v) for v in self.controller_position))


@dataclass(frozen=True)
class OracleClassifier:
    """Labels in, decisions out, with fixed per-channel error rates.

    Emits probability 1.0 or 0.0 per channel and step; channel errors are
    independent.
    """

    sensitivity: float
    specificity: float
    channels: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.sensitivity <= 1 and 0 <= self.specificity <= 1):
            raise ConfigurationError("oracle sensitivity/specificity must lie in [0, 1]")

    def probabilities(self, labels: np.ndarray, seed) -> np.ndarray:
        entropy = [int(v) for v in np.atleast_1d(seed)]
        rng = np.random.default_rng(np.random.SeedSequence([*entropy, self.seed, 0x0AC1E]))
        u = rng.random((self.channels, labels.size))
        pos = labels == 1
        out = np.where(pos[None, :], u < self.sensitivity, u >= self.specificity)
        return out.astype(np.float64)


@dataclass(frozen=True)
class StreamClassifier:
    """Pre-computed probabilities, shape (channels, steps)."""

    probs: np.ndarray

    def probabilities(self, labels: np.ndarray, seed=None) -> np.ndarray:
        p = np.atleast_2d(np.asarray(self.probs, dtype=np.float64))
        if p.shape[1] < labels.size:
            raise ScenarioError(f"classifier stream has {p.shape[1]} steps, scenario needs {labels.size}")
        return p[:, :labels.size]


@dataclass(frozen=True)
class NetworkConfig:
    b_app: int = 16
    t_app: float = 4.0
    phy: PhyConfig = field(default_factory=PhyConfig)
    processing_delay_s: float = 0.01
    relay_turnaround_s: float = 0.001
    fusion_deadline_s: float = 2.0

    def __post_init__(self):
        if self.t_app <= 0:
            raise ConfigurationError("t_app must be positive")
        if not 0 < self.fusion_deadline_s <= self.t_app:
            raise ConfigurationError("fusion deadline must fall within one t_app")


def default_nodes() -> tuple[NodeConfig, ...]:
    # Gateway at the origin; implant-controller link is the 5 mm short-range hop.
    return (
        NodeConfig("ieeg", NodeKind.IEEG_CLASSIFIER, (0.0, 0.005, 0.45), (0.0, 0.0, 0.45)),
        NodeConfig("ecg", NodeKind.ECG_CLASSIFIER, (0.3, 0.0, 0.0)),
        NodeConfig("gw", NodeKind.GATEWAY, (0.0, 0.0, 0.0)),
        NodeConfig("dbs", NodeKind.DBS, (0.0, 0.02, 0.42)),
    )


@dataclass(frozen=True)
class Scenario:
    nodes: tuple = field(default_factory=default_nodes)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    channel: ChannelModel = field(default_factory=ChannelModel)
    classifiers: dict = field(default_factory=dict)  # "ecg" / "ieeg" -> source
    fusion: FusionConfig = field(default_factory=FusionConfig)
    duration_s: float = 3600.0
    seed: int = 0
    onsets: tuple = ()
    horizon_s: float = 3600.0
    exclusion_s: float = 600.0
    mode: str = "closed_loop"  # or "saturation"
    offered_bps: float = 5000.0
    frame_budget: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if self.mode not in ("closed_loop", "saturation"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.duration_s <= 0:
            raise ConfigurationError("duration must be positive")

    def node(self, kind: NodeKind) -> NodeConfig | None:
        for n in self.nodes:
            if n.kind is kind:
                return n
        return None


# --------------------------------------------------------------------------
# YAML scenario files
# --------------------------------------------------------------------------

def _classifier_from_dict(d: dict):
    kind = d.get("type", "oracle")
    if kind == "oracle":
        return OracleClassifier(d["sensitivity"], d["specificity"], int(d.get("channels", 1)),
                                int(d.get("seed", 0)))
    if kind == "stream":
        return StreamClassifier(np.load(d["path"]) if "path" in d else np.asarray(d["probs"]))
    raise ConfigurationError(f"unknown classifier type {kind!r}")


def scenario_from_dict(d: dict, seed: int | None = None, fusion_rule: str | None = None) -> Scenario:
    net = dict(d.get("network", {}))
    phy = PhyConfig(**{k: net.pop(k) for k in ("spreading_factor", "slot_time_s", "hop_positions") if k in net})
    network = NetworkConfig(phy=phy, **net)
    ch = dict(d.get("channel", {}))
    if "link_loss" in ch:
        ch["link_loss"] = {tuple(k.split("->")): float(v) for k, v in ch["link_loss"].items()}
    channel = ChannelModel(**ch)
    if "nodes" in d:
        nodes = tuple(NodeConfig(id=k, **v) for k, v in d["nodes"].items())
    else:
        nodes = default_nodes()
    fusion = dict(d.get("fusion", {}))
    if fusion_rule is not None:
        fusion["modality_rule"] = fusion_rule
    labels = d.get("labels", {})
    return Scenario(
        nodes=nodes, network=network, channel=channel,
        classifiers={k: _classifier_from_dict(v) for k, v in d.get("classifiers", {}).items()},
        fusion=FusionConfig(**fusion),
        duration_s=float(d.get("duration_s", 3600.0)),
        seed=int(d.get("seed", 0) if seed is None else seed),
        onsets=tuple(float(o) for o in labels.get("onsets", ())),
        horizon_s=float(labels.get("horizon_s", 3600.0)),
        exclusion_s=float(labels.get("exclusion_s", 600.0)),
        mode=d.get("mode", "closed_loop"),
        offered_bps=float(d.get("offered_bps", 5000.0)),
        frame_budget=d.get("frame_budget"),
    )


def load_scenario(path, **overrides) -> Scenario:
    with open(Path(path)) as fh:
        return scenario_from_dict(yaml.safe_load(fh) or {}, **overrides)
