"""Discrete-event run of the four-node network and the decision loop.

Closed-loop mode, per 4 s step ``k`` (window closing at ``(k + 1) * t_app``):

* the ECG node votes and sends its result to the gateway;
* the iEEG implant votes and sends to its controller (5 mm hop), which
  relays to the gateway;
* the gateway fuses once every required modality has reported, or at the
  fusion deadline using the last value it heard;
* a fused Preictal raises an ALERT (sink event) and sends stimulation
  settings to the DBS node.

Saturation mode instead has every node send back-to-back frames at
``offered_bps`` to measure goodput and drop rate.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, DecodeError, ScenarioError
from ..metrics import ConfusionMatrix, confusion_from_decisions, summarize
from ..predictor import ModalityRule, StreamingVoter, fuse_modalities
from ..signals import window_labels
from .channel import Link, transmit
from .events import EventQueue, format_trace_line, parse_trace_line
from .mac import Schedule, assign_codes, hops_disjoint
from .phy import AppMessage, MessageKind, decode_message, ppm_demodulate, ppm_modulate, step_bits
from .scenario import NodeKind, Scenario

MODALITY_NODE = {"ecg": NodeKind.ECG_CLASSIFIER, "ieeg": NodeKind.IEEG_CLASSIFIER}


def required_bitrate(b_app: float, t_app: float) -> float:
    """Minimum per-node application rate in bit/s."""
    if t_app <= 0:
        raise ConfigurationError("t_app must be positive")
    return b_app / t_app


def total_bitrate(b_app: float, t_app: float, node_count: int = 4) -> float:
    return node_count * required_bitrate(b_app, t_app)


@dataclass
class LinkStats:
    sent: int = 0
    delivered: int = 0
    dropped_channel: int = 0
    dropped_collision: int = 0
    dropped_decode: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_channel + self.dropped_collision + self.dropped_decode


@dataclass(frozen=True)
class SimReport:
    duration_s: float
    goodput_bps: dict
    aggregate_goodput_bps: float
    frames_sent: int
    frames_delivered: int
    frames_dropped: int
    drop_rate: float
    links: dict
    alert_latencies: tuple
    fused_cm: ConfusionMatrix
    gateway_cm: dict  # modality -> ConfusionMatrix of the gateway's view
    node_cm: dict  # modality -> ConfusionMatrix of node-side decisions
    alerts: int
    stimulations: int
    trace: tuple = field(repr=False, default=())

    def to_dict(self) -> dict:
        lat = np.asarray(self.alert_latencies)
        return {
            "duration_s": self.duration_s,
            "goodput_bps": self.goodput_bps,
            "aggregate_goodput_bps": self.aggregate_goodput_bps,
            "frames": {"sent": self.frames_sent, "delivered": self.frames_delivered,
                       "dropped": self.frames_dropped},
            "drop_rate": self.drop_rate,
            "links": {k: vars(v) for k, v in self.links.items()},
            "alerts": self.alerts,
            "stimulations": self.stimulations,
            "alert_latency_s": {
                "count": int(lat.size),
                "max": float(lat.max()) if lat.size else None,
                "mean": float(lat.mean()) if lat.size else None,
                "p95": float(np.percentile(lat, 95)) if lat.size else None,
            },
            "fused": summarize(self.fused_cm),
            "gateway_view": {m: summarize(cm) for m, cm in self.gateway_cm.items()},
            "node_view": {m: summarize(cm) for m, cm in self.node_cm.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def trace_text(self) -> str:
        return "\n".join(self.trace) + "\n"


@dataclass
class _Arrival:
    start: float
    end: float
    code_index: int
    hop_id: int
    source: str
    collided: bool = False


class Simulator:
    def __init__(self, scenario: Scenario, schedule: Schedule | None = None):
        self.sc = scenario
        self.net = scenario.network
        self.phy = scenario.network.phy
        gws = [n for n in scenario.nodes if n.kind is NodeKind.GATEWAY]
        if len(gws) != 1:
            raise ScenarioError(f"scenario needs exactly one gateway, found {len(gws)}")
        self.gateway = gws[0].id
        self.nodes = {n.id: n for n in scenario.nodes}
        self.node_index = {n.id: i for i, n in enumerate(scenario.nodes)}
        self.schedule = schedule or assign_codes(
            self.gateway, list(self.nodes), hop_positions=self.phy.hop_positions,
            hop_length=self.net.b_app * self.phy.spreading_factor, seed=scenario.seed)
        missing = [n for n in self.nodes if n not in self.schedule]
        if missing:
            raise ScenarioError(f"no code/hop schedule for node(s) {missing}")
        self.by_kind = {n.kind: n.id for n in scenario.nodes}
        if scenario.mode == "closed_loop":
            for modality in scenario.classifiers:
                if MODALITY_NODE[modality] not in self.by_kind:
                    raise ScenarioError(f"classifier source for {modality} but no such node")
            for modality in self._required_modalities():
                if modality not in scenario.classifiers:
                    raise ScenarioError(f"fusion rule needs a {modality} classifier source")

        self.q = EventQueue()
        self.rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, 0xC4A7]))
        self.trace: list[str] = []
        self.links: dict[str, LinkStats] = defaultdict(LinkStats)
        self.delivered_bits: dict[str, int] = defaultdict(int)
        self.busy_until: dict[tuple, float] = defaultdict(float)
        self.arrivals: dict[tuple, list[_Arrival]] = defaultdict(list)
        self.frames_generated = 0
        self._clash_cache: dict[tuple, bool] = {}
        self.active_until = scenario.duration_s

    # ---------------------------------------------------------------- helpers
    def _required_modalities(self):
        rule = self.sc.fusion.modality_rule
        return {ModalityRule.AND: ("ecg", "ieeg"), ModalityRule.OR: ("ecg", "ieeg"),
                ModalityRule.ECG_ONLY: ("ecg",), ModalityRule.IEEG_ONLY: ("ieeg",)}[rule]

    def _log(self, t, kind, src, dst, detail=""):
        self.trace.append(format_trace_line(t, kind, src, dst, detail))

    def _position(self, endpoint):
        node_id, role = endpoint
        node = self.nodes[node_id]
        if role == "controller" and node.controller_position is not None:
            return node.controller_position
        return node.position

    def _endpoint_name(self, endpoint):
        node_id, role = endpoint
        return f"{node_id}.{role}" if role else node_id

    def send(self, t, src_ep, dst_ep, msg: AppMessage):
        """Queue a frame on the sender's radio (one frame on air at a time)."""
        node_id = src_ep[0]
        a = self.schedule[node_id]
        t_tx = max(t, self.busy_until[src_ep])
        frame = ppm_modulate(msg, a.code, a.hop_seq, self.phy, tx_time=t_tx, code_index=a.code_index,
                             hop_seq_id=a.hop_seq_id, node_index=self.node_index[node_id])
        self.busy_until[src_ep] = t_tx + frame.duration
        self.frames_generated += 1
        self.q.schedule(t_tx, "frame-tx", (src_ep, dst_ep, frame))

    def _on_tx(self, t, src_ep, dst_ep, frame):
        src, dst = self._endpoint_name(src_ep), self._endpoint_name(dst_ep)
        link = Link(src, dst, self._position(src_ep), self._position(dst_ep))
        stats = self.links[f"{src}->{dst}"]
        stats.sent += 1
        msg = frame.message
        self._log(t, "frame-tx", src, dst, f"kind={msg.kind.name} step={msg.step_index} "
                  f"code={frame.code_index} dur={frame.duration:.6f}")
        outcome = transmit(frame, link, self.sc.channel, self.rng)
        if not outcome.delivered:
            stats.dropped_channel += 1
            self.q.schedule(outcome.rx_time, "frame-drop", (src_ep, dst_ep, frame, "channel"))
            return
        arrival = _Arrival(outcome.arrival_start, outcome.rx_time, frame.code_index, frame.hop_seq_id, src_ep[0])
        self.arrivals[dst_ep].append(arrival)
        self.q.schedule(outcome.rx_time, "frame-rx", (src_ep, dst_ep, frame, arrival))

    def _clash(self, a, b) -> bool:
        """Same spreading code or shared hop sub-slots: not separable."""
        key = (a, b) if a <= b else (b, a)
        if key not in self._clash_cache:
            sa, sb = self.schedule[a], self.schedule[b]
            self._clash_cache[key] = sa.code_index == sb.code_index or not hops_disjoint(sa, sb)
        return self._clash_cache[key]

    def _collides(self, dst_ep, arrival) -> bool:
        lst = self.arrivals[dst_ep]
        hit = False
        for other in lst:
            if other is arrival or other.end <= arrival.start or other.start >= arrival.end:
                continue
            if self._clash(other.source, arrival.source):
                other.collided = True
                hit = True
        # Pending arrivals start no earlier than now minus one frame, so older
        # entries can never overlap again.
        if len(lst) > 64:
            horizon = arrival.start - (arrival.end - arrival.start)
            self.arrivals[dst_ep] = [x for x in lst if x.end > horizon]
        return hit or arrival.collided

    def _on_rx(self, t, src_ep, dst_ep, frame, arrival):
        src, dst = self._endpoint_name(src_ep), self._endpoint_name(dst_ep)
        stats = self.links[f"{src}->{dst}"]
        if self._collides(dst_ep, arrival):
            stats.dropped_collision += 1
            self._log(t, "frame-drop", src, dst, f"reason=collision step={frame.message.step_index}")
            return
        chips = frame.chips
        cer = self.sc.channel.chip_error_rate
        if cer > 0:
            flips = self.rng.random(chips.size) < cer
            chips = chips ^ flips.astype(np.uint8)
            frame.chips = chips
        try:
            decoded = decode_message(ppm_demodulate(frame, self.schedule[src_ep[0]].code))
        except DecodeError:
            stats.dropped_decode += 1
            self._log(t, "frame-drop", src, dst, f"reason=decode step={frame.message.step_index}")
            return
        stats.delivered += 1
        self.delivered_bits[src_ep[0]] += self.net.b_app
        self._log(t, "frame-rx", src, dst, f"kind={decoded.kind.name} step={frame.message.step_index}")
        self._dispatch(t, src_ep, dst_ep, decoded)

    def _on_drop(self, t, src_ep, dst_ep, frame, reason):
        self._log(t, "frame-drop", self._endpoint_name(src_ep), self._endpoint_name(dst_ep),
                  f"reason={reason} step={frame.message.step_index}")

    # ---------------------------------------------------------------- closed loop
    def _setup_closed_loop(self):
        t_app = self.net.t_app
        self.n_steps = int(math.floor(self.sc.duration_s / t_app + 1e-9))
        _, self.labels = window_labels(self.n_steps * t_app, self.sc.onsets, self.sc.horizon_s,
                                       self.sc.exclusion_s, window_s=t_app)
        oracle_truth = np.where(self.labels == 1, 1, 0)
        # Each modality draws from its own stream so oracle errors are independent.
        self.streams = {m: src.probabilities(oracle_truth, (self.sc.seed, i))
                        for i, (m, src) in enumerate(sorted(self.sc.classifiers.items()))}
        self.voters = {m: StreamingVoter(self.sc.fusion) for m in self.streams}
        self.node_decisions = {m: np.zeros(self.n_steps, dtype=np.int8) for m in self.streams}
        self.gw_view = {m: np.zeros(self.n_steps, dtype=np.int8) for m in ("ecg", "ieeg")}
        self.received = {m: {} for m in ("ecg", "ieeg")}
        self.last_heard = {"ecg": 0, "ieeg": 0}
        self.fused = np.zeros(self.n_steps, dtype=np.int8)
        self.fused_done = np.zeros(self.n_steps, dtype=bool)
        self.latencies: list[float] = []
        self.alerts = 0
        self.stimulations = 0
        self.node_modality = {self.by_kind[MODALITY_NODE[m]]: m for m in self.streams}
        self.step_mod = 1 << step_bits(self.net.b_app)
        for k in range(self.n_steps):
            close = (k + 1) * t_app
            self.q.schedule(close + self.net.processing_delay_s, "window", k)
            self.q.schedule(close + self.net.fusion_deadline_s, "deadline", k)

    def _on_window(self, t, k):
        for modality in ("ecg", "ieeg"):
            if modality not in self.streams:
                continue
            probs = self.streams[modality][:, k]
            d = self.voters[modality].step(probs)
            self.node_decisions[modality][k] = d.time_vote
            node = self.by_kind[MODALITY_NODE[modality]]
            self._log(t, "decision", node, "-", f"step={k} p={';'.join(f'{p:.4f}' for p in probs)} "
                      f"channel_vote={d.channel_vote} time_vote={d.time_vote}")
            if modality == "ecg":
                msg = AppMessage(MessageKind.CLASSIFICATION_RESULT, node, self.gateway, k, d.time_vote, self.net.b_app)
                self.send(t, (node, None), (self.gateway, None), msg)
            else:
                msg = AppMessage(MessageKind.CLASSIFICATION_RESULT, node, node, k, d.time_vote, self.net.b_app)
                self.send(t, (node, "implant"), (node, "controller"), msg)

    def _resolve_step(self, t, step_mod):
        # Latest step whose window has closed and whose index matches the field.
        newest = int(math.floor(t / self.net.t_app + 1e-9)) - 1
        k = newest - ((newest - step_mod) % self.step_mod)
        return k if 0 <= k < self.n_steps else None

    def _dispatch(self, t, src_ep, dst_ep, decoded):
        if self.sc.mode != "closed_loop":
            return
        node, role = dst_ep
        if decoded.kind is MessageKind.CLASSIFICATION_RESULT and role == "controller":
            k = self._resolve_step(t, decoded.step_mod)
            msg = AppMessage(MessageKind.CLASSIFICATION_RESULT, node, self.gateway, k, decoded.decision, self.net.b_app)
            self.send(t + self.net.relay_turnaround_s, (node, "controller"), (self.gateway, None), msg)
        elif decoded.kind is MessageKind.CLASSIFICATION_RESULT and node == self.gateway:
            modality = self.node_modality.get(src_ep[0])
            k = self._resolve_step(t, decoded.step_mod)
            if modality is None or k is None:
                return
            if self.fused_done[k]:
                self._log(t, "late", src_ep[0], node, f"step={k}")
                return
            self.received[modality][k] = decoded.decision
            self.last_heard[modality] = decoded.decision
            if all(k in self.received[m] for m in self._required_modalities()):
                self._fuse(t, k)
        elif decoded.kind is MessageKind.STIMULATION_SETTINGS:
            k = self._resolve_step(t, decoded.step_mod)
            self.stimulations += 1
            self._log(t, "stimulation", src_ep[0], node, f"step={k}")

    def _fuse(self, t, k):
        if self.fused_done[k]:
            return
        held = []
        for m in ("ecg", "ieeg"):
            if k in self.received[m]:
                self.gw_view[m][k] = self.received[m].pop(k)
            else:
                self.gw_view[m][k] = self.last_heard[m]
                if m in self._required_modalities():
                    held.append(m)
        fused = fuse_modalities(self.gw_view["ecg"][k], self.gw_view["ieeg"][k], self.sc.fusion.modality_rule)
        self.fused[k] = fused
        self.fused_done[k] = True
        self._log(t, "fuse", self.gateway, "-", f"step={k} ecg={self.gw_view['ecg'][k]} "
                  f"ieeg={self.gw_view['ieeg'][k]} fused={fused} label={self.labels[k]}"
                  + (f" held={','.join(held)}" if held else ""))
        if fused:
            latency = t - (k + 1) * self.net.t_app
            self.latencies.append(latency)
            self.alerts += 1
            self._log(t, "alert", self.gateway, "sink", f"step={k} latency={latency:.9f}")
            dbs = self.by_kind.get(NodeKind.DBS)
            if dbs is not None:
                msg = AppMessage(MessageKind.STIMULATION_SETTINGS, self.gateway, dbs, k, 1, self.net.b_app)
                self.send(t, (self.gateway, None), (dbs, None), msg)

    # ---------------------------------------------------------------- saturation
    def _setup_saturation(self):
        interval = self.net.b_app / self.sc.offered_bps
        if interval < self.phy.frame_duration(self.net.b_app):
            raise ScenarioError("offered load exceeds the per-node PHY rate")
        self.sat_interval = interval
        dbs = self.by_kind.get(NodeKind.DBS)
        self.sat_routes = []
        for node in self.sc.nodes:
            if node.kind is NodeKind.GATEWAY:
                if dbs is None:
                    continue
                src, dst = (node.id, None), (dbs, None)
            elif node.kind is NodeKind.IEEG_CLASSIFIER:
                src, dst = (node.id, "controller"), (self.gateway, None)
            else:
                src, dst = (node.id, None), (self.gateway, None)
            self.sat_routes.append((src, dst))
        for i, route in enumerate(self.sat_routes):
            self.q.schedule(i * interval / len(self.sat_routes), "offer", (i, 0))

    def _on_offer(self, t, i, n):
        if t >= self.sc.duration_s:
            return
        if self.sc.frame_budget is not None and self.frames_generated >= self.sc.frame_budget:
            self.active_until = min(self.active_until, t)
            return
        src, dst = self.sat_routes[i]
        msg = AppMessage(MessageKind.CLASSIFICATION_RESULT, src[0], dst[0], n, n & 1, self.net.b_app)
        self.send(t, src, dst, msg)
        self.q.schedule(t + self.sat_interval, "offer", (i, n + 1))

    # ---------------------------------------------------------------- run
    def run(self) -> SimReport:
        for row in self.schedule.control_lines(0.0):
            self._log(*row)
        closed = self.sc.mode == "closed_loop"
        if closed:
            self._setup_closed_loop()
        else:
            self._setup_saturation()
        while self.q:
            ev = self.q.pop()
            t = ev.timestamp
            if ev.kind == "frame-tx":
                self._on_tx(t, *ev.data)
            elif ev.kind == "frame-rx":
                self._on_rx(t, *ev.data)
            elif ev.kind == "frame-drop":
                self._on_drop(t, *ev.data)
            elif ev.kind == "window":
                self._on_window(t, ev.data)
            elif ev.kind == "deadline":
                self._fuse(t, ev.data)
            elif ev.kind == "offer":
                self._on_offer(t, *ev.data)
        return self._report(closed)

    def _report(self, closed) -> SimReport:
        duration = self.active_until
        sent = sum(s.sent for s in self.links.values())
        delivered = sum(s.delivered for s in self.links.values())
        dropped = sum(s.dropped for s in self.links.values())
        goodput = {n: self.delivered_bits.get(n, 0) / duration for n in self.nodes}
        fused_cm, gw_cm, node_cm = ConfusionMatrix(), {}, {}
        latencies, alerts, stims = (), 0, 0
        if closed:
            scored = self.labels >= 0
            y = self.labels[scored]
            fused_cm = confusion_from_decisions(self.fused[scored], y)
            for m in self.streams:
                gw_cm[m] = confusion_from_decisions(self.gw_view[m][scored], y)
                node_cm[m] = confusion_from_decisions(self.node_decisions[m][scored], y)
            latencies, alerts, stims = tuple(self.latencies), self.alerts, self.stimulations
        return SimReport(
            duration_s=duration, goodput_bps=goodput, aggregate_goodput_bps=sum(goodput.values()),
            frames_sent=sent, frames_delivered=delivered, frames_dropped=dropped,
            drop_rate=dropped / sent if sent else 0.0, links=dict(self.links),
            alert_latencies=latencies, fused_cm=fused_cm, gateway_cm=gw_cm, node_cm=node_cm,
            alerts=alerts, stimulations=stims, trace=tuple(self.trace))


def run_simulation(scenario: Scenario, schedule: Schedule | None = None) -> SimReport:
    return Simulator(scenario, schedule).run()


def confusion_from_trace(lines) -> ConfusionMatrix:
    """Recount the fused-decision confusion matrix from ``fuse`` trace rows."""
    d, y = [], []
    for line in lines:
        if not line.strip():
            continue
        _, kind, _, _, detail = parse_trace_line(line)
        if kind == "fuse" and int(detail["label"]) >= 0:
            d.append(int(detail["fused"]))
            y.append(int(detail["label"]))
    return confusion_from_decisions(d, y)
