import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dar.grid_scan import (
    DIAGONAL_DIRECTIONS,
    Direction,
    GridShape,
    adjacency_stats,
    diagonal_order,
    inverse_permutation,
    make_order,
    raster_order,
    scan_report,
    step_label,
)

D, R, UR, DL, LB = Direction.DOWN, Direction.RIGHT, Direction.UP_RIGHT, Direction.DOWN_LEFT, Direction.LINE_BREAK

shapes = st.builds(GridShape, st.integers(1, 32), st.integers(1, 32))


def brute_zigzag(h, w):
    # independent oracle: walk anti-diagonals, odd ones with x descending
    out = []
    for d in range(h + w - 1):
        cells = [(x, d - x) for x in range(h) if 0 <= d - x < w]
        out.extend(reversed(cells) if d % 2 else cells)
    return out


def test_raster_2x2():
    o = raster_order(GridShape(2, 2))
    assert o.positions == ((0, 0), (0, 1), (1, 0), (1, 1))
    assert o.directions == (R, LB, R)


def test_raster_single_row_all_right():
    assert set(raster_order(GridShape(1, 4)).directions) == {R}


def test_raster_index_5_of_3x3():
    assert raster_order(GridShape(3, 3)).positions[5] == (1, 2)


def test_diagonal_2x2():
    o = diagonal_order(GridShape(2, 2))
    assert o.positions == ((0, 0), (1, 0), (0, 1), (1, 1))
    assert o.directions == (D, UR, D)


def test_diagonal_3x3():
    o = diagonal_order(GridShape(3, 3))
    assert o.positions == ((0, 0), (1, 0), (0, 1), (0, 2), (1, 1), (2, 0), (2, 1), (1, 2), (2, 2))
    assert o.directions == (D, UR, R, DL, DL, R, UR, D)


def test_single_cell():
    o = diagonal_order(GridShape(1, 1))
    assert o.positions == ((0, 0),) and o.directions == ()


@pytest.mark.parametrize("h,w", [(1, 1), (1, 7), (7, 1), (3, 5), (5, 3), (16, 16), (32, 9)])
def test_diagonal_matches_brute_force(h, w):
    assert list(diagonal_order(GridShape(h, w)).positions) == brute_zigzag(h, w)


def test_inverse_permutation_examples():
    assert inverse_permutation(raster_order(GridShape(2, 2)))[1, 0] == 2
    assert inverse_permutation(diagonal_order(GridShape(3, 3)))[2, 0] == 5


def test_bijective_and_adjacent_exhaustive():
    for h in range(1, 33):
        for w in range(1, 33):
            shape = GridShape(h, w)
            for kind in ("raster", "diagonal"):
                c = make_order(shape, kind).coords
                assert len({tuple(p) for p in c}) == h * w
            c = diagonal_order(shape).coords
            if h * w > 1:
                assert np.hypot(*np.diff(c, axis=0).T).max() <= math.sqrt(2) + 1e-12
            if h >= 2 and w >= 2:
                # the line-break jump is sqrt((w-1)^2 + 1), which exceeds sqrt(2) only from w = 3
                r = adjacency_stats(raster_order(shape)).max_step_dist
                assert r == pytest.approx(math.hypot(w - 1, 1), abs=1e-12)
                assert r > math.sqrt(2) or w == 2


@given(shapes)
def test_labels_recomputed_from_deltas(shape):
    for kind in ("raster", "diagonal"):
        o = make_order(shape, kind)
        d = np.diff(o.coords, axis=0)
        assert tuple(step_label(tuple(x), kind) for x in d) == o.directions
    assert set(diagonal_order(shape).directions) <= DIAGONAL_DIRECTIONS


@given(shapes)
def test_flatten_roundtrip(shape):
    o = diagonal_order(shape)
    g = np.arange(shape.T).reshape(shape.h, shape.w)
    seq = o.flatten(g)
    assert np.array_equal(o.unflatten(seq), g)
    inv = inverse_permutation(o)
    assert np.array_equal(seq[inv], g)


def test_adjacency_16x16():
    r = adjacency_stats(raster_order(GridShape(16, 16)))
    assert r.max_step_dist == pytest.approx(math.sqrt(15**2 + 1), abs=1e-12)
    d = adjacency_stats(diagonal_order(GridShape(16, 16)))
    assert d.max_step_dist == pytest.approx(math.sqrt(2), abs=1e-12)


def test_report_3x3_histogram():
    rep = scan_report(GridShape(3, 3), "diagonal")
    assert rep["direction_histogram"] == {"Down": 2, "UpRight": 2, "Right": 2, "DownLeft": 2}
    assert set(rep) == {"shape", "order", "max_step_dist", "mean_step_dist", "direction_histogram"}


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        GridShape(0, 3)
    with pytest.raises(ValueError):
        make_order(GridShape(2, 2), "spiral")
    with pytest.raises(ValueError):
        adjacency_stats(diagonal_order(GridShape(1, 1)))
