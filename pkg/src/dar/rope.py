"""2D and 4D rotary position embeddings.

A rotation table holds one complex unit-modulus factor per (token, frequency
slot).  Query/key vectors are viewed as interleaved complex pairs
``(v[2j], v[2j+1])`` and multiplied slot-wise by the table.

In 2D mode slot ``2t`` rotates by the row coordinate and slot ``2t+1`` by the
column coordinate.  In 4D mode each token carries its own position and the
position of the token generated after it, and slots ``4t .. 4t+3`` rotate by
``(cur.x, cur.y, nxt.x, nxt.y)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from dar.grid_scan import Position2D

BASE = 10000.0


class RopeMode(str, enum.Enum):
    TWO_D = "2d"
    FOUR_D = "4d"

    @property
    def coords_per_token(self) -> int:
        return 2 if self is RopeMode.TWO_D else 4


class Position4D(NamedTuple):
    cur: Position2D
    nxt: Position2D


@dataclass(frozen=True)
class RotationTable:
    entries: np.ndarray  # complex128, (n, head_dim // 2)
    head_dim: int

    def __len__(self) -> int:
        return self.entries.shape[0]

    @property
    def cos(self) -> np.ndarray:
        return self.entries.real

    @property
    def sin(self) -> np.ndarray:
        return self.entries.imag

    def rows(self, start: int, stop: int) -> "RotationTable":
        return RotationTable(self.entries[start:stop], self.head_dim)


def check_head_dim(head_dim: int, mode: RopeMode) -> None:
    mode = RopeMode(mode)
    div = 2 * mode.coords_per_token
    if head_dim <= 0 or head_dim % div:
        raise ValueError(f"{mode.value} rope needs head_dim divisible by {div}, got {head_dim}")


def frequencies(head_dim: int, mode: RopeMode) -> np.ndarray:
    mode = RopeMode(mode)
    check_head_dim(head_dim, mode)
    n = head_dim // (2 * mode.coords_per_token)
    return BASE ** (-np.arange(n, dtype=np.float64) / n)


def _table(coords: np.ndarray, head_dim: int, mode: RopeMode) -> RotationTable:
    # coords: (n, c) with c coordinates per token; slot c*t + k uses theta_t * coords[:, k]
    theta = frequencies(head_dim, mode)
    angles = coords[:, None, :].astype(np.float64) * theta[None, :, None]
    angles = angles.reshape(coords.shape[0], head_dim // 2)
    return RotationTable(np.exp(1j * angles), head_dim)


def rotation_table_2d(positions: Sequence[Position2D] | np.ndarray, head_dim: int) -> RotationTable:
    coords = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    return _table(coords, head_dim, RopeMode.TWO_D)


def rotation_table_4d(positions: Sequence[Position4D] | np.ndarray, head_dim: int) -> RotationTable:
    coords = np.asarray(positions, dtype=np.float64).reshape(-1, 4)
    return _table(coords, head_dim, RopeMode.FOUR_D)


def apply_rotation(vectors: np.ndarray, table: RotationTable) -> np.ndarray:
    """Rotate ``(..., n, head_dim)`` real vectors by the table rows ``0..n-1``."""
    vectors = np.asarray(vectors)
    if vectors.shape[-1] != table.head_dim:
        raise ValueError(f"vector width {vectors.shape[-1]} != table head_dim {table.head_dim}")
    if vectors.shape[-2] != len(table):
        raise ValueError(f"{vectors.shape[-2]} tokens but table has {len(table)} rows")
    z = vectors[..., 0::2] + 1j * vectors[..., 1::2]
    z = z * table.entries
    out = np.empty(vectors.shape, dtype=np.result_type(vectors.dtype, np.float32))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out
