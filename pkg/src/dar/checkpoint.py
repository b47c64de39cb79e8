"""Checkpoint files.

Layout (little-endian)::

    b"DARCK1" | u32 header_len | header JSON (utf-8) | float32 payload | u32 crc32

The header holds ``config``, ``fingerprint``, free-form ``meta`` and a
``tensors`` manifest of ``{name, shape, offset}`` with byte offsets into the
payload.  The CRC covers header JSON and payload.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from pathlib import Path

import numpy as np

from dar.model import FROZEN, ModelConfig, ModelParams
from dar.numerics import Tensor

MAGIC = b"DARCK1"


class CheckpointError(ValueError):
    pass


def checkpoint_to_bytes(params: ModelParams, meta: dict | None = None) -> bytes:
    manifest, chunks, offset = [], [], 0
    for name, t in params.tensors.items():
        buf = np.ascontiguousarray(t.data, dtype="<f4").tobytes()
        manifest.append({"name": name, "shape": list(t.shape), "offset": offset})
        chunks.append(buf)
        offset += len(buf)
    header = {
        "config": params.config.to_dict(),
        "fingerprint": params.config.fingerprint(),
        "meta": meta or {},
        "tensors": manifest,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = hbytes + b"".join(chunks)
    return MAGIC + struct.pack("<I", len(hbytes)) + body + struct.pack("<I", zlib.crc32(body))


def checkpoint_from_bytes(data: bytes) -> tuple[ModelParams, dict]:
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    if len(data) < len(MAGIC) + 8:
        raise CheckpointError("truncated checkpoint")
    (hlen,) = struct.unpack_from("<I", data, len(MAGIC))
    body = data[len(MAGIC) + 4 : -4]
    (crc,) = struct.unpack("<I", data[-4:])
    if len(body) < hlen or zlib.crc32(body) != crc:
        raise CheckpointError("checksum mismatch or truncated checkpoint")
    try:
        header = json.loads(body[:hlen].decode("utf-8"))
        cfg = ModelConfig.from_dict(header["config"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"invalid checkpoint header: {e}") from None
    payload = body[hlen:]
    tensors = {}
    for entry in header["tensors"]:
        n = math.prod(entry["shape"])
        start = entry["offset"]
        if start + 4 * n > len(payload):
            raise CheckpointError(f"tensor {entry['name']!r} runs past the payload")
        arr = np.frombuffer(payload, dtype="<f4", count=n, offset=start).astype(np.float32)
        name = entry["name"]
        tensors[name] = Tensor(arr.reshape(entry["shape"]), requires_grad=name not in FROZEN, name=name)
    return ModelParams(cfg, tensors), header


def save_checkpoint(params: ModelParams, path: str | Path, meta: dict | None = None) -> None:
    Path(path).write_bytes(checkpoint_to_bytes(params, meta))


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    return checkpoint_from_bytes(Path(path).read_bytes())
