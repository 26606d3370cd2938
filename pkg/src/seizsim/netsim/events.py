"""Event queue with a deterministic (timestamp, sequence) ordering."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any


@dataclass(order=True)
class SimEvent:
    timestamp: float
    seq: int
    kind: str = field(compare=False)
    data: Any = field(compare=False, default=None)


class EventQueue:
    def __init__(self):
        self._heap: list[SimEvent] = []
        self._seq = 0
        self.now = 0.0

    def schedule(self, timestamp: float, kind: str, data=None) -> SimEvent:
        if timestamp < self.now:
            raise ValueError(f"cannot schedule {kind} at {timestamp} before now={self.now}")
        ev = SimEvent(timestamp, self._seq, kind, data)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> SimEvent:
        ev = heapq.heappop(self._heap)
        self.now = ev.timestamp
        return ev

    def __len__(self):
        return len(self._heap)

    def __bool__(self):
        return bool(self._heap)


def format_trace_line(t: float, kind: str, src: str, dst: str, detail: str = "") -> str:
    return f"{t:.9f} {kind} {src or '-'} {dst or '-'} {detail}".rstrip()


def parse_trace_line(line: str) -> tuple[float, str, str, str, dict]:
    parts = line.split(" ", 4)
    t, kind, src, dst = float(parts[0]), parts[1], parts[2], parts[3]
    detail = {}
    if len(parts) > 4:
        for tok in parts[4].split():
            if "=" in tok:
                k, v = tok.split("=", 1)
                detail[k] = v
    return t, kind, src, dst, detail
