"""Synthetic vector-quantized tokenizer.

A seeded random codebook stands in for a pretrained tokenizer: feature
grids are quantized by nearest code, token grids decode by table lookup, and
the same table doubles as the frozen token-embedding source of the model.

File layout (little-endian)::

    b"DARCB1" | u32 K | u32 D | u64 seed | K*D float32 | u32 crc32(floats)
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dar.grid_scan import GridShape

MAGIC = b"DARCB1"
_HEADER = struct.Struct("<IIQ")
HEADER_SIZE = len(MAGIC) + _HEADER.size


class CodebookFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Codebook:
    codes: np.ndarray  # (K, D) float32
    seed: int = 0

    @property
    def K(self) -> int:
        return self.codes.shape[0]

    @property
    def D(self) -> int:
        return self.codes.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Codebook):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.codes.shape == other.codes.shape
            and self.codes.tobytes() == other.codes.tobytes()
        )

    __hash__ = None


@dataclass(eq=False)
class TokenGrid:
    tokens: np.ndarray  # (h, w) int
    class_label: int = 0

    @property
    def shape(self) -> GridShape:
        return GridShape(*self.tokens.shape)


def make_codebook(K: int, D: int, seed: int = 0) -> Codebook:
    if K < 2 or D < 1:
        raise ValueError(f"codebook needs K >= 2 and D >= 1, got K={K}, D={D}")
    rng = np.random.default_rng(seed)
    codes = rng.standard_normal((K, D)).astype(np.float32)
    if len(np.unique(codes, axis=0)) != K:
        raise ValueError("generated codebook has duplicate codes; choose another seed")
    return Codebook(codes, int(seed))


def nearest_codes(x: np.ndarray, codes: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Index of the nearest code (squared Euclidean, ties to lowest index) for each row of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(codes, dtype=np.float64)
    out = np.empty(x.shape[0], dtype=np.int64)
    for s in range(0, x.shape[0], chunk):
        d = np.square(x[s : s + chunk, None, :] - c[None, :, :]).sum(axis=-1)
        out[s : s + chunk] = np.argmin(d, axis=1)
    return out


def quantize(features: np.ndarray, cb: Codebook, class_label: int = 0) -> TokenGrid:
    features = np.asarray(features)
    if features.ndim != 3 or features.shape[-1] != cb.D:
        raise ValueError(f"features must be (h, w, {cb.D}), got {features.shape}")
    h, w, _ = features.shape
    idx = nearest_codes(features.reshape(-1, cb.D), cb.codes)
    return TokenGrid(idx.reshape(h, w), class_label)


def decode(tokens: TokenGrid | np.ndarray, cb: Codebook) -> np.ndarray:
    """Map ``(..., h, w)`` token indices to ``(..., h, w, D)`` features."""
    t = np.asarray(tokens.tokens if isinstance(tokens, TokenGrid) else tokens)
    if t.size and (t.min() < 0 or t.max() >= cb.K):
        raise IndexError(f"token index out of range [0, {cb.K})")
    return cb.codes[t]


def render_pixels(features: np.ndarray, scale: int = 16, value_range: float = 3.0) -> np.ndarray:
    """Render ``(h, w, D)`` features as an 8-bit RGB image of ``(h*scale, w*scale, 3)``.

    Channels 0..2 map affinely from ``[-value_range, value_range]`` to
    ``[0, 255]``; with fewer than three channels the available ones repeat.
    """
    f = np.asarray(features, dtype=np.float64)
    rgb = f[..., [i % f.shape[-1] for i in range(3)]]
    rgb = np.clip(np.round((rgb + value_range) / (2 * value_range) * 255.0), 0, 255).astype(np.uint8)
    return np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)


def write_ppm(path: str | Path, rgb: np.ndarray) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6" or int(parts[3]) != 255:
        raise ValueError(f"{path}: not an 8-bit binary PPM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4], dtype=np.uint8, count=h * w * 3).reshape(h, w, 3)


def codebook_to_bytes(cb: Codebook) -> bytes:
    payload = cb.codes.astype("<f4").tobytes()
    return MAGIC + _HEADER.pack(cb.K, cb.D, cb.seed) + payload + struct.pack("<I", zlib.crc32(payload))


def codebook_from_bytes(data: bytes) -> Codebook:
    if data[: len(MAGIC)] != MAGIC:
        raise CodebookFormatError("bad magic; not a codebook file")
    if len(data) < HEADER_SIZE:
        raise CodebookFormatError("truncated header")
    K, D, seed = _HEADER.unpack_from(data, len(MAGIC))
    end = HEADER_SIZE + 4 * K * D
    if len(data) != end + 4:
        raise CodebookFormatError(f"expected {end + 4} bytes, got {len(data)}")
    payload = data[HEADER_SIZE:end]
    (crc,) = struct.unpack_from("<I", data, end)
    if zlib.crc32(payload) != crc:
        raise CodebookFormatError("checksum mismatch")
    codes = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(K, D)
    return Codebook(codes, seed)


def save_codebook(cb: Codebook, path: str | Path) -> None:
    Path(path).write_bytes(codebook_to_bytes(cb))


def load_codebook(path: str | Path) -> Codebook:
    return codebook_from_bytes(Path(path).read_bytes())
