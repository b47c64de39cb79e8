"""Raster and diagonal (zigzag) scan orders over 2D token grids.

A scan order is a bijection between sequence indices and grid cells plus a
label for every step describing the direction of travel from one token to
the next.  Rows are indexed by ``x`` and columns by ``y``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np


class Direction(enum.IntEnum):
    """Generation-direction labels.  Values index the direction embedding table."""

    RIGHT = 0
    DOWN = 1
    UP_RIGHT = 2
    DOWN_LEFT = 3
    LINE_BREAK = 4
    START = 5

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    Direction.RIGHT: "Right",
    Direction.DOWN: "Down",
    Direction.UP_RIGHT: "UpRight",
    Direction.DOWN_LEFT: "DownLeft",
    Direction.LINE_BREAK: "LineBreak",
    Direction.START: "Start",
}

DIAGONAL_DIRECTIONS = frozenset(
    {Direction.RIGHT, Direction.DOWN, Direction.UP_RIGHT, Direction.DOWN_LEFT}
)
RASTER_DIRECTIONS = frozenset({Direction.RIGHT, Direction.LINE_BREAK})

_DIAGONAL_DELTAS = {
    (0, 1): Direction.RIGHT,
    (1, 0): Direction.DOWN,
    (-1, 1): Direction.UP_RIGHT,
    (1, -1): Direction.DOWN_LEFT,
}


@dataclass(frozen=True)
class GridShape:
    h: int
    w: int

    def __post_init__(self) -> None:
        if int(self.h) != self.h or int(self.w) != self.w:
            raise ValueError(f"grid dimensions must be integers, got {self.h}x{self.w}")
        if self.h < 1 or self.w < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.h}x{self.w}")

    @property
    def T(self) -> int:
        return self.h * self.w


class Position2D(NamedTuple):
    x: int
    y: int


def step_label(delta: tuple[int, int], kind: str) -> Direction:
    """Label a single step ``p_{n+1} - p_n`` for the given order kind."""
    dx, dy = delta
    if kind == "raster":
        return Direction.RIGHT if (dx, dy) == (0, 1) else Direction.LINE_BREAK
    if kind == "diagonal":
        try:
            return _DIAGONAL_DELTAS[(dx, dy)]
        except KeyError:
            raise ValueError(f"step {delta} is not a diagonal-scan move") from None
    raise ValueError(f"unknown scan kind {kind!r}")


@dataclass(frozen=True, eq=False)
class ScanOrder:
    """Visiting order of an ``h x w`` grid.

    ``coords`` is the read-only ``(T, 2)`` array of visited cells;
    ``directions[n]`` labels the step from cell ``n`` to cell ``n + 1``.
    """

    shape: GridShape
    kind: str
    coords: np.ndarray
    directions: tuple[Direction, ...]

    def __post_init__(self) -> None:
        c = np.array(self.coords, dtype=np.int64).reshape(-1, 2)
        c.flags.writeable = False
        object.__setattr__(self, "coords", c)

    @cached_property
    def positions(self) -> tuple[Position2D, ...]:
        return tuple(map(Position2D._make, self.coords.tolist()))

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScanOrder):
            return NotImplemented
        return (self.shape, self.kind, self.directions) == (other.shape, other.kind, other.directions) and bool(
            np.array_equal(self.coords, other.coords)
        )

    __hash__ = None

    def flatten(self, grid: np.ndarray) -> np.ndarray:
        """Read a ``(..., h, w)`` grid into ``(..., T)`` sequence order."""
        c = self.coords
        return grid[..., c[:, 0], c[:, 1]]

    def unflatten(self, seq: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`flatten`."""
        seq = np.asarray(seq)
        out = np.empty(seq.shape[:-1] + (self.shape.h, self.shape.w), dtype=seq.dtype)
        c = self.coords
        out[..., c[:, 0], c[:, 1]] = seq
        return out


# index (dx + 1) * 3 + (dy + 1) -> diagonal label, -1 for moves a zigzag never makes
_DIAGONAL_TABLE = np.full(9, -1, dtype=np.int64)
for (_dx, _dy), _d in _DIAGONAL_DELTAS.items():
    _DIAGONAL_TABLE[(_dx + 1) * 3 + (_dy + 1)] = _d
_BY_VALUE = tuple(Direction)


def _label_steps(coords: np.ndarray, kind: str) -> tuple[Direction, ...]:
    d = np.diff(coords, axis=0)
    if kind == "raster":
        right = (d[:, 0] == 0) & (d[:, 1] == 1)
        codes = np.where(right, Direction.RIGHT, Direction.LINE_BREAK)
    else:
        inside = (np.abs(d) <= 1).all(axis=1)
        codes = np.where(inside, _DIAGONAL_TABLE[(np.clip(d[:, 0], -1, 1) + 1) * 3 + np.clip(d[:, 1], -1, 1) + 1], -1)
        if (codes < 0).any():
            bad = tuple(d[np.argmax(codes < 0)])
            raise ValueError(f"step {bad} is not a diagonal-scan move")
    return tuple(_BY_VALUE[c] for c in codes.tolist())


def _order(shape: GridShape, kind: str, coords: np.ndarray) -> ScanOrder:
    return ScanOrder(shape, kind, coords, _label_steps(coords, kind))


def raster_order(shape: GridShape) -> ScanOrder:
    x, y = np.divmod(np.arange(shape.T, dtype=np.int64), shape.w)
    return _order(shape, "raster", np.stack([x, y], axis=1))


def diagonal_order(shape: GridShape) -> ScanOrder:
    """Zigzag over anti-diagonals ``d = x + y`` starting at the top-left cell.

    Odd diagonals run bottom-left to top-right, even ones the other way, so
    diagonal 1 goes ``(1, 0) -> (0, 1)``.  On any ``h x w`` grid this keeps
    every step within one king move.
    """
    h, w = shape.h, shape.w
    x, y = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    x, y = x.ravel(), y.ravel()
    d = x + y
    # within a diagonal: odd ones by descending x, even ones by ascending x
    key = np.where(d % 2 == 1, -x, x)
    idx = np.lexsort((key, d))
    return _order(shape, "diagonal", np.stack([x[idx], y[idx]], axis=1).astype(np.int64))


def make_order(shape: GridShape, kind: str) -> ScanOrder:
    if kind == "raster":
        return raster_order(shape)
    if kind == "diagonal":
        return diagonal_order(shape)
    raise ValueError(f"unknown scan kind {kind!r}; expected 'raster' or 'diagonal'")


def inverse_permutation(order: ScanOrder) -> np.ndarray:
    """Return an ``(h, w)`` array mapping each cell to its sequence index."""
    inv = np.full((order.shape.h, order.shape.w), -1, dtype=np.int64)
    c = order.coords
    inv[c[:, 0], c[:, 1]] = np.arange(len(order))
    return inv


@dataclass(frozen=True)
class AdjacencyStats:
    max_step_dist: float
    mean_step_dist: float
    direction_histogram: dict[str, int]


def adjacency_stats(order: ScanOrder) -> AdjacencyStats:
    if len(order) < 2:
        raise ValueError("adjacency stats need at least two tokens")
    c = order.coords.astype(np.float64)
    dist = np.hypot(*np.diff(c, axis=0).T)
    hist: dict[str, int] = {}
    for d in order.directions:
        hist[d.label] = hist.get(d.label, 0) + 1
    return AdjacencyStats(float(dist.max()), float(dist.mean()), hist)


def scan_report(shape: GridShape, kind: str) -> dict:
    stats = adjacency_stats(make_order(shape, kind))
    return {
        "shape": [shape.h, shape.w],
        "order": kind,
        "max_step_dist": stats.max_step_dist,
        "mean_step_dist": stats.mean_step_dist,
        "direction_histogram": stats.direction_histogram,
    }

