import numpy as np
import pytest

from dar.rope import (
    RopeMode,
    apply_rotation,
    frequencies,
    rotation_table_2d,
    rotation_table_4d,
)

HD = 32


def score(q, k, table_q, table_k):
    return float(apply_rotation(q[None], table_q)[0] @ apply_rotation(k[None], table_k)[0])


def test_zero_position_is_identity():
    assert np.array_equal(rotation_table_2d([(0, 0)], 8).entries, np.ones((1, 4), complex))
    assert np.array_equal(rotation_table_4d([((0, 0), (0, 0))], 16).entries, np.ones((1, 8), complex))


def test_first_slot_of_row_one():
    e = rotation_table_2d([(1, 0)], 8).entries[0]
    assert e[0] == pytest.approx(np.cos(1) + 1j * np.sin(1), abs=1e-15)
    assert e[1] == 1  # column slot stays unrotated


def test_frequency_counts_and_values():
    f2 = frequencies(16, "2d")
    assert f2.shape == (4,) and f2[0] == 1.0
    assert f2[1] == pytest.approx(10000 ** (-1 / 4))
    assert frequencies(16, "4d").shape == (2,)


@pytest.mark.parametrize("hd,mode", [(6, "2d"), (12, "4d"), (0, "2d")])
def test_bad_head_dim(hd, mode):
    with pytest.raises(ValueError):
        frequencies(hd, mode)


def test_identity_rotation_leaves_vectors():
    v = np.random.default_rng(0).normal(size=(3, 8))
    out = apply_rotation(v, rotation_table_2d(np.zeros((3, 2)), 8))
    assert np.array_equal(out, v)


def test_apply_rejects_mismatch():
    t = rotation_table_2d(np.zeros((3, 2)), 8)
    with pytest.raises(ValueError):
        apply_rotation(np.zeros((3, 4)), t)
    with pytest.raises(ValueError):
        apply_rotation(np.zeros((2, 8)), t)


@pytest.mark.parametrize("mode", list(RopeMode))
def test_norm_preservation(mode):
    rng = np.random.default_rng(1)
    c = mode.coords_per_token
    for _ in range(100):
        pos = rng.integers(-20, 20, size=(5, c))
        v = rng.normal(size=(5, HD))
        table = rotation_table_2d(pos, HD) if c == 2 else rotation_table_4d(pos, HD)
        out = apply_rotation(v, table)
        assert np.allclose(np.linalg.norm(out, axis=1), np.linalg.norm(v, axis=1), rtol=0, atol=1e-10)


@pytest.mark.parametrize("mode", list(RopeMode))
def test_relative_shift_invariance(mode):
    rng = np.random.default_rng(2)
    c = mode.coords_per_token
    make = rotation_table_2d if c == 2 else rotation_table_4d
    for _ in range(100):
        q, k = rng.normal(size=HD), rng.normal(size=HD)
        pq, pk = rng.integers(0, 16, c), rng.integers(0, 16, c)
        shift = np.tile(rng.integers(-50, 50, 2), c // 2)
        a = score(q, k, make([pq], HD), make([pk], HD))
        b = score(q, k, make([pq + shift], HD), make([pk + shift], HD))
        assert abs(a - b) < 1e-8


def test_4d_direction_sensitivity():
    rng = np.random.default_rng(3)
    for _ in range(100):
        cur = rng.integers(0, 16, 2)
        n1, n2 = rng.integers(0, 16, 2), rng.integers(0, 16, 2)
        while np.array_equal(n1, n2):
            n2 = rng.integers(0, 16, 2)
        t = rotation_table_4d([np.r_[cur, n1], np.r_[cur, n2]], HD).entries
        assert not np.allclose(t[0], t[1])


def test_4d_slot_layout():
    # slots 4t..4t+3 rotate by cur.x, cur.y, nxt.x, nxt.y at theta_t
    t = rotation_table_4d([((1, 2), (3, 4))], 16).entries[0]
    theta = 10000 ** (-np.arange(2) / 2)
    want = np.exp(1j * np.outer(theta, [1, 2, 3, 4]).reshape(-1))
    assert np.allclose(t, want, atol=1e-15)
