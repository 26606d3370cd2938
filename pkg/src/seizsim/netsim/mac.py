"""Centralized code and time-hopping assignment made by the gateway."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CapacityError, ConfigurationError
from .phy import walsh_codes


@dataclass(frozen=True)
class Assignment:
    node: str
    code_index: int
    code: tuple
    hop_seq_id: int
    hop_seq: tuple


@dataclass(frozen=True)
class Schedule:
    gateway: str
    assignments: dict  # node id -> Assignment

    def __getitem__(self, node):
        return self.assignments[node]

    def __contains__(self, node):
        return node in self.assignments

    def control_lines(self, t: float = 0.0) -> list[tuple]:
        """(time, kind, src, dst, detail) rows for the trace, one per node."""
        rows = []
        for node, a in self.assignments.items():
            rows.append((t, "control", self.gateway, node,
                         f"code={a.code_index} hop_seq={a.hop_seq_id}"))
        return rows


def assign_codes(gateway: str, nodes, codes=None, hop_positions: int = 4,
                 hop_length: int = 128, seed: int = 0) -> Schedule:
    """Give every node its own spreading code and a time-hopping sequence.

    Hop sequences are cyclic shifts of one seeded base sequence, so at any
    chip index no two nodes use the same hop sub-slot.
    """
    nodes = list(nodes)
    if len(set(nodes)) != len(nodes):
        raise ConfigurationError("node ids must be distinct")
    if gateway not in nodes:
        nodes = [gateway, *nodes]
    codes = walsh_codes(8) if codes is None else np.atleast_2d(np.asarray(codes, dtype=np.uint8))
    if len(nodes) > codes.shape[0]:
        raise CapacityError(f"{len(nodes)} nodes but only {codes.shape[0]} orthogonal codes")
    if len(nodes) > hop_positions:
        raise CapacityError(f"{len(nodes)} nodes but only {hop_positions} disjoint hop positions")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0DE]))
    code_order = rng.permutation(codes.shape[0])[:len(nodes)]
    base = rng.integers(0, hop_positions, size=hop_length)
    assignments = {}
    for i, node in enumerate(nodes):
        ci = int(code_order[i])
        assignments[node] = Assignment(node, ci, tuple(int(c) for c in codes[ci]), i,
                                       tuple(int(h) for h in (base + i) % hop_positions))
    return Schedule(gateway, assignments)


def hops_disjoint(a: Assignment, b: Assignment) -> bool:
    n = min(len(a.hop_seq), len(b.hop_seq))
    return not np.any(np.asarray(a.hop_seq[:n]) == np.asarray(b.hop_seq[:n]))
