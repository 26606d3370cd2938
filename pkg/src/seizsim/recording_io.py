"""Binary recording files (little-endian).

Layout::

    magic "SZN1" | version u16 | modality u8 | channel_count u16 |
    sample_rate_hz u32 | sample_count u64 | onset_count u32 |
    onsets f64[onset_count] | samples f32[channels x samples], channel-major |
    CRC32 of every preceding byte (u32)

The format carries no patient identifier; :func:`load_recording` takes it
as an argument and falls back to the file stem.
"""

from __future__ import annotations

import os
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import FormatError
from .signals import Modality, Recording

MAGIC = b"SZN1"
VERSION = 1
_HEADER = struct.Struct("<4sHBHIQI")


def encode_recording(rec: Recording) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, int(rec.modality), rec.channel_count,
                          rec.sample_rate_hz, rec.sample_count, rec.seizure_onsets.size)
    body = (header + rec.seizure_onsets.astype("<f8").tobytes()
            + np.ascontiguousarray(rec.samples, dtype="<f4").tobytes())
    return body + struct.pack("<I", zlib.crc32(body))


def decode_recording(data: bytes, patient_id: str = "p0") -> Recording:
    if len(data) < _HEADER.size:
        raise FormatError(f"file holds {len(data)} bytes, header needs {_HEADER.size}", len(data))
    magic, version, modality, channels, fs, n, n_onsets = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}", 4)
    if modality not in (0, 1):
        raise FormatError(f"unknown modality code {modality}", 6)
    off = _HEADER.size
    need = off + 8 * n_onsets + 4 * channels * n + 4
    if len(data) != need:
        # Name the channel where the payload stops, when it stops inside one.
        where = ""
        payload_start = off + 8 * n_onsets
        if payload_start < len(data) < need - 4 and n:
            where = f" inside channel {(len(data) - payload_start) // (4 * n)}"
        raise FormatError(f"expected {need} bytes, found {len(data)}{where}", min(len(data), need))
    onsets = np.frombuffer(data, dtype="<f8", count=n_onsets, offset=off).astype(np.float64)
    off += 8 * n_onsets
    samples = np.frombuffer(data, dtype="<f4", count=channels * n, offset=off)
    off += 4 * channels * n
    (crc,) = struct.unpack_from("<I", data, off)
    actual = zlib.crc32(data[:off])
    if crc != actual:
        raise FormatError(f"CRC32 mismatch: stored {crc:#010x}, computed {actual:#010x}", off)
    return Recording(patient_id, Modality(modality), fs,
                     samples.reshape(channels, n).astype(np.float32), onsets)


def save_recording(rec: Recording, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_recording(rec))
    os.replace(tmp, path)


def load_recording(path, patient_id: str | None = None) -> Recording:
    path = Path(path)
    return decode_recording(path.read_bytes(), patient_id if patient_id is not None else path.stem)
