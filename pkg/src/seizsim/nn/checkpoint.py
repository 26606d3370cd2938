"""Model checkpoint files.

Layout (little-endian): magic "SZNM" | version u16 | spec length u32 |
spec as UTF-8 JSON | parameter count u64 | f32 parameters in spec order |
CRC32 of every preceding byte.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .model import ConvBlock, ModelParams, ModelSpec

MAGIC = b"SZNM"
VERSION = 1


def spec_to_dict(spec: ModelSpec) -> dict:
    d = asdict(spec)
    d["conv_blocks"] = [asdict(b) for b in spec.conv_blocks]
    d["dense_widths"] = list(spec.dense_widths)
    return d


def spec_from_dict(d: dict) -> ModelSpec:
    d = dict(d)
    d["conv_blocks"] = tuple(ConvBlock(**b) for b in d["conv_blocks"])
    d["dense_widths"] = tuple(d["dense_widths"])
    return ModelSpec(**d)


def encode_checkpoint(params: ModelParams) -> bytes:
    spec_json = json.dumps(spec_to_dict(params.spec), sort_keys=True).encode()
    flat = params.flat().astype("<f4")
    body = (MAGIC + struct.pack("<HI", VERSION, len(spec_json)) + spec_json
            + struct.pack("<Q", flat.size) + flat.tobytes())
    return body + struct.pack("<I", zlib.crc32(body))


def decode_checkpoint(data: bytes) -> ModelParams:
    if data[:4] != MAGIC:
        raise FormatError(f"bad checkpoint magic {data[:4]!r}", 0)
    if len(data) < 10:
        raise FormatError("truncated checkpoint header", len(data))
    version, n_spec = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", 4)
    off = 10
    try:
        spec = spec_from_dict(json.loads(data[off:off + n_spec].decode()))
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"unreadable model spec: {exc}", off) from None
    off += n_spec
    if len(data) < off + 8:
        raise FormatError("truncated parameter count", len(data))
    (count,) = struct.unpack_from("<Q", data, off)
    off += 8
    need = off + 4 * count + 4
    if len(data) != need:
        raise FormatError(f"expected {need} bytes, found {len(data)}", min(len(data), need))
    flat = np.frombuffer(data, dtype="<f4", count=count, offset=off).astype(np.float64)
    off += 4 * count
    (crc,) = struct.unpack_from("<I", data, off)
    if crc != zlib.crc32(data[:off]):
        raise FormatError("checkpoint CRC32 mismatch", off)
    arrays, pos = {}, 0
    for name, shape in spec.param_shapes().items():
        size = int(np.prod(shape))
        arrays[name] = flat[pos:pos + size].reshape(shape).copy()
        pos += size
    if pos != count:
        raise FormatError(f"spec needs {pos} parameters, file holds {count}", off - 4 * count)
    return ModelParams(spec, arrays)


def save_checkpoint(params: ModelParams, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(params))
    os.replace(tmp, path)


def load_checkpoint(path) -> ModelParams:
    return decode_checkpoint(Path(path).read_bytes())
