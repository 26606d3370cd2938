"""Impulse-radio PPM with a superimposed spreading code and time hopping.

Each payload bit is spread over ``spreading_factor`` chips.  Chip ``c`` of a
bit ``b`` is a single pulse in the early (0) or late (1) half of its hop
position, the half being ``b XOR code[c]``.  Every chip has its own slot of
``slot_time`` seconds split into ``hop_positions`` sub-slots; the node's
time-hopping sequence picks the sub-slot.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard

from ..errors import ConfigurationError, DecodeError


def walsh_codes(order: int = 8) -> np.ndarray:
    """Rows of the Sylvester Hadamard matrix as 0/1 chips (+1 -> 0, -1 -> 1)."""
    return (hadamard(order) < 0).astype(np.uint8)


@dataclass(frozen=True)
class PhyConfig:
    spreading_factor: int = 8
    slot_time_s: float = 100e-6
    hop_positions: int = 4

    def __post_init__(self):
        if self.spreading_factor < 1 or self.hop_positions < 1 or self.slot_time_s <= 0:
            raise ConfigurationError("invalid PHY configuration")

    def frame_duration(self, payload_bits: int) -> float:
        return payload_bits * self.spreading_factor * self.slot_time_s

    def node_rate_bps(self) -> float:
        """Raw bit rate of one node transmitting back to back."""
        return 1.0 / (self.spreading_factor * self.slot_time_s)


# --------------------------------------------------------------------------
# application messages and their bit layout
# --------------------------------------------------------------------------

class MessageKind(enum.IntEnum):
    CLASSIFICATION_RESULT = 0
    STIMULATION_SETTINGS = 1
    ALERT = 2
    CONTROL = 3


@dataclass(frozen=True)
class AppMessage:
    kind: MessageKind
    source: str
    destination: str
    step_index: int
    decision: int = 0
    payload_bits: int = 16


CRC8_POLY = 0x07
HEADER_BITS = 5  # kind (2) + node index (2) + decision (1)


def crc8(bits) -> np.ndarray:
    """CRC-8 (polynomial x^8 + x^2 + x + 1, zero init) of a bit sequence."""
    reg = 0
    for b in bits:
        top = ((reg >> 7) & 1) ^ int(b)
        reg = (reg << 1) & 0xFF
        if top:
            reg ^= CRC8_POLY
    return np.array([(reg >> (7 - i)) & 1 for i in range(8)], dtype=np.uint8)


def _to_bits(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def _from_bits(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def step_bits(payload_bits: int) -> int:
    return payload_bits - HEADER_BITS - 8


def encode_message(msg: AppMessage, node_index: int) -> np.ndarray:
    """``kind | node | decision | step (mod 2**k) | CRC-8`` as a bit array."""
    k = step_bits(msg.payload_bits)
    if k < 1:
        raise ConfigurationError(f"payload of {msg.payload_bits} bits cannot hold the header and CRC")
    data = (_to_bits(int(msg.kind), 2) + _to_bits(node_index % 4, 2) + [int(bool(msg.decision))]
            + _to_bits(msg.step_index % (1 << k), k))
    return np.concatenate([np.array(data, dtype=np.uint8), crc8(data)])


@dataclass(frozen=True)
class DecodedMessage:
    kind: MessageKind
    node_index: int
    decision: int
    step_mod: int


def decode_message(bits) -> DecodedMessage:
    bits = np.asarray(bits, dtype=np.uint8)
    data, crc = bits[:-8], bits[-8:]
    if not np.array_equal(crc8(data), crc):
        raise DecodeError("CRC-8 check failed")
    return DecodedMessage(MessageKind(_from_bits(data[:2])), _from_bits(data[2:4]),
                          int(data[4]), _from_bits(data[5:]))


# --------------------------------------------------------------------------
# frames
# --------------------------------------------------------------------------

@dataclass(eq=False)
class MacFrame:
    code_index: int
    hop_seq_id: int
    chips: np.ndarray  # PPM half per chip: 0 early, 1 late
    hops: np.ndarray  # hop sub-slot per chip
    tx_time: float
    duration: float
    slot_time_s: float
    hop_positions: int
    source: str = ""
    destination: str = ""
    message: AppMessage | None = field(default=None, repr=False)

    @property
    def chip_count(self) -> int:
        return self.chips.size

    def pulse_offsets(self) -> np.ndarray:
        """Pulse times relative to ``tx_time``."""
        sub = self.slot_time_s / self.hop_positions
        j = np.arange(self.chips.size)
        return j * self.slot_time_s + self.hops * sub + self.chips * (sub / 2)


def ppm_modulate(msg, code, hop_seq, phy: PhyConfig = PhyConfig(), tx_time: float = 0.0,
                 code_index: int = -1, hop_seq_id: int = -1, node_index: int = 0) -> MacFrame:
    """Spread and position-modulate a message (AppMessage or raw bit array)."""
    code = np.asarray(code, dtype=np.uint8).ravel()
    if code.size == 0:
        raise ConfigurationError("spreading code is empty")
    if code.size != phy.spreading_factor:
        raise ConfigurationError(f"code length {code.size} != spreading factor {phy.spreading_factor}")
    if isinstance(msg, AppMessage):
        bits = encode_message(msg, node_index)
        src, dst = msg.source, msg.destination
    else:
        bits = np.asarray(msg, dtype=np.uint8).ravel()
        src = dst = ""
        msg = None
    if bits.size == 0:
        raise ConfigurationError("payload must carry at least one bit")
    chips = (bits[:, None] ^ code[None, :]).ravel()
    hop_seq = np.asarray(hop_seq, dtype=np.int64).ravel()
    hops = np.resize(hop_seq, chips.size) % phy.hop_positions
    return MacFrame(code_index, hop_seq_id, chips.astype(np.uint8), hops, tx_time,
                    phy.frame_duration(bits.size), phy.slot_time_s, phy.hop_positions, src, dst, msg)


def ppm_demodulate(frame: MacFrame, code) -> np.ndarray:
    """Despread by chip majority. An even split on any bit raises DecodeError."""
    code = np.asarray(code, dtype=np.uint8).ravel()
    if code.size == 0:
        raise ConfigurationError("spreading code is empty")
    if frame.chips.size % code.size:
        raise DecodeError("frame length is not a multiple of the code length")
    votes = (frame.chips.reshape(-1, code.size) ^ code[None, :]).astype(np.int64)
    ones = votes.sum(axis=1)
    zeros = code.size - ones
    if np.any(ones == zeros):
        raise DecodeError("chip majority inconclusive (wrong code or heavy interference)")
    return (ones > zeros).astype(np.uint8)


def max_correctable_chips(spreading_factor: int) -> int:
    return (spreading_factor - 1) // 2
