import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seizsim.errors import ConfigurationError, DecodeError
from seizsim.netsim.phy import (
    AppMessage,
    MessageKind,
    PhyConfig,
    crc8,
    decode_message,
    encode_message,
    max_correctable_chips,
    ppm_demodulate,
    ppm_modulate,
    walsh_codes,
)

CODES = walsh_codes(8)
HOPS = np.arange(128) % 4


def msg(step=5, decision=1, kind=MessageKind.CLASSIFICATION_RESULT):
    return AppMessage(kind, "ecg", "gw", step, decision)


def test_walsh_codes_are_orthogonal():
    signed = 1 - 2 * CODES.astype(int)
    assert np.array_equal(signed @ signed.T, 8 * np.eye(8, dtype=int))


def test_frame_duration_arithmetic():
    frame = ppm_modulate(msg(), CODES[1], HOPS, PhyConfig(8, 100e-6))
    assert frame.duration == pytest.approx(16 * 8 * 100e-6, abs=1e-15)
    assert frame.duration == pytest.approx(0.0128, abs=1e-15)
    assert frame.chip_count == 128


def test_round_trip_through_message_layout():
    m = msg(step=13, decision=1, kind=MessageKind.STIMULATION_SETTINGS)
    frame = ppm_modulate(m, CODES[3], HOPS, node_index=2)
    decoded = decode_message(ppm_demodulate(frame, CODES[3]))
    assert decoded.kind is MessageKind.STIMULATION_SETTINGS
    assert (decoded.node_index, decoded.decision, decoded.step_mod) == (2, 1, 13 % 8)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=64), st.integers(0, 7))
def test_raw_bits_round_trip(bits, code):
    frame = ppm_modulate(np.array(bits, dtype=np.uint8), CODES[code], HOPS)
    assert ppm_demodulate(frame, CODES[code]).tolist() == bits


def test_all_zero_payload_with_zero_code_is_all_early():
    frame = ppm_modulate(np.zeros(16, dtype=np.uint8), np.zeros(8, dtype=np.uint8), HOPS)
    assert not frame.chips.any()
    sub = frame.slot_time_s / frame.hop_positions
    offsets = frame.pulse_offsets() - np.arange(frame.chip_count) * frame.slot_time_s - frame.hops * sub
    assert np.allclose(offsets, 0.0)


def test_three_flipped_chips_are_corrected():
    frame = ppm_modulate(msg(), CODES[5], HOPS)
    clean = ppm_demodulate(frame, CODES[5]).copy()
    assert max_correctable_chips(8) == 3
    frame.chips[[0, 3, 6]] ^= 1  # three chips of bit 0
    assert np.array_equal(ppm_demodulate(frame, CODES[5]), clean)


def test_wrong_orthogonal_code_is_signalled():
    frame = ppm_modulate(msg(), CODES[2], HOPS)
    with pytest.raises(DecodeError):
        decode_message(ppm_demodulate(frame, CODES[6]))


def test_crc_catches_single_bit_error():
    bits = encode_message(msg(), 1)
    assert np.array_equal(crc8(bits[:-8]), bits[-8:])
    bad = bits.copy()
    bad[3] ^= 1
    with pytest.raises(DecodeError):
        decode_message(bad)


def test_crc8_known_vector():
    # CRC-8/SMBUS of ASCII "123456789" is 0xF4.
    data = np.unpackbits(np.frombuffer(b"123456789", dtype=np.uint8))
    assert int("".join(map(str, crc8(data))), 2) == 0xF4


def test_validation():
    with pytest.raises(ConfigurationError):
        ppm_modulate(msg(), np.zeros(4, dtype=np.uint8), HOPS)
    with pytest.raises(ConfigurationError):
        ppm_modulate(np.zeros(0, dtype=np.uint8), CODES[0], HOPS)
    with pytest.raises(ConfigurationError):
        encode_message(AppMessage(MessageKind.ALERT, "a", "b", 0, payload_bits=12), 0)
