"""Synthetic class-conditional token-grid datasets.

File layout (little-endian)::

    b"DARDS1" | u32 h | u32 w | u32 K | u32 num_classes | u32 count
    | count x (u16 class, h*w u16 tokens row-major) | u32 crc32(all preceding bytes)
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from dar.grid_scan import GridShape

MAGIC = b"DARDS1"
_HEADER = struct.Struct("<5I")
FAMILIES = ("constant", "stripes", "checker", "gradient")


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    h: int = 8
    w: int = 8
    K: int = 64
    num_classes: int = 8
    samples_per_class: int = 32
    noise_rate: float = 0.0
    family: str = "constant"
    seed: int = 0

    def __post_init__(self) -> None:
        GridShape(self.h, self.w)
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ValueError("noise_rate must be in [0, 1)")
        if self.K < 2 or self.K > 65536:
            raise ValueError("K must be in [2, 65536]")
        if self.num_classes < 1 or self.num_classes > 65535:
            raise ValueError("num_classes must be in [1, 65535]")
        if self.family == "constant" and self.num_classes > self.K:
            raise ValueError("constant family needs num_classes <= K")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class Dataset:
    shape: GridShape
    K: int
    num_classes: int
    classes: np.ndarray  # (N,) int64
    grids: np.ndarray  # (N, h, w) int64

    def __len__(self) -> int:
        return self.classes.shape[0]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.shape, self.K, self.num_classes, self.classes[idx], self.grids[idx])

    def fingerprint(self) -> str:
        return hashlib.sha256(dataset_to_bytes(self)).hexdigest()[:16]


def clean_pattern(family: str, k: int, shape: GridShape, K: int, num_classes: int) -> np.ndarray:
    """The noise-free grid of class ``k``."""
    i, j = np.meshgrid(np.arange(shape.h), np.arange(shape.w), indexing="ij")
    alt = (k + num_classes) % K
    if family == "constant":
        g = np.full(i.shape, k)
    elif family == "stripes":
        g = np.where(j % 2 == 0, k, alt)
    elif family == "checker":
        g = np.where((i + j) % 2 == 0, k, alt)
    elif family == "gradient":
        g = (k + i + j) % K
    else:
        raise ValueError(f"unknown family {family!r}")
    return g.astype(np.int64) % K


def generate_dataset(spec: DatasetSpec) -> Dataset:
    shape = GridShape(spec.h, spec.w)
    rng = np.random.default_rng(spec.seed)
    n = spec.samples_per_class
    grids, classes = [], []
    for k in range(spec.num_classes):
        clean = clean_pattern(spec.family, k, shape, spec.K, spec.num_classes)
        batch = np.broadcast_to(clean, (n, shape.h, shape.w)).copy()
        corrupt = rng.random(batch.shape) < spec.noise_rate
        batch[corrupt] = rng.integers(0, spec.K, int(corrupt.sum()))
        grids.append(batch)
        classes.append(np.full(n, k, dtype=np.int64))
    return Dataset(shape, spec.K, spec.num_classes, np.concatenate(classes), np.concatenate(grids))


def train_val_split(ds: Dataset, val_frac: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays; the last ``val_frac`` of each class (by index) is held out."""
    train, val = [], []
    for k in range(ds.num_classes):
        idx = np.flatnonzero(ds.classes == k)
        n_val = max(1, int(len(idx) * val_frac)) if len(idx) >= 2 else 0
        train.append(idx[: len(idx) - n_val])
        val.append(idx[len(idx) - n_val :])
    return np.concatenate(train), np.concatenate(val)


def dataset_to_bytes(ds: Dataset) -> bytes:
    h, w = ds.shape.h, ds.shape.w
    head = MAGIC + _HEADER.pack(h, w, ds.K, ds.num_classes, len(ds))
    rec = np.empty((len(ds), 1 + h * w), dtype="<u2")
    rec[:, 0] = ds.classes
    rec[:, 1:] = ds.grids.reshape(len(ds), -1)
    body = head + rec.tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


def dataset_from_bytes(data: bytes) -> Dataset:
    if data[: len(MAGIC)] != MAGIC:
        raise DatasetFormatError("bad magic; not a dataset file")
    off = len(MAGIC) + _HEADER.size
    if len(data) < off + 4:
        raise DatasetFormatError("truncated header")
    h, w, K, C, n = _HEADER.unpack_from(data, len(MAGIC))
    if len(data) != off + n * (1 + h * w) * 2 + 4:
        raise DatasetFormatError("file size does not match header")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise DatasetFormatError("checksum mismatch")
    rec = np.frombuffer(data, dtype="<u2", count=n * (1 + h * w), offset=off).reshape(n, 1 + h * w)
    grids = rec[:, 1:].astype(np.int64).reshape(n, h, w)
    return Dataset(GridShape(h, w), K, C, rec[:, 0].astype(np.int64), grids)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    Path(path).write_bytes(dataset_to_bytes(ds))


def load_dataset(path: str | Path) -> Dataset:
    return dataset_from_bytes(Path(path).read_bytes())
