"""
Rotary positions in 2D and 4D
=============================

A rotary table turns each position into per-pair complex rotations.  Dot
products of rotated vectors only see the offset between positions, which is
what attention relies on.
"""

# %%
import numpy as np

from dar.rope import apply_rotation, rotation_table_2d, rotation_table_4d

rng = np.random.default_rng(0)
q, k = rng.normal(size=16), rng.normal(size=16)


def score(table_fn, a, b):
    t = table_fn(np.array([a, b]), 16)
    rq = apply_rotation(np.stack([q, q]), t)[0]
    rk = apply_rotation(np.stack([k, k]), t)[1]
    return float(rq @ rk)


# %%
# Same 2D offset, different absolute positions: same score.
print(score(rotation_table_2d, (0, 0), (1, 2)))
print(score(rotation_table_2d, (5, 3), (6, 5)))

# %%
# 4D positions stack the current cell and the next cell to predict.  Moving
# only the "next" half changes the score, so the model can tell directions apart.
print(score(rotation_table_4d, (2, 2, 2, 3), (2, 3, 3, 2)))
print(score(rotation_table_4d, (2, 2, 3, 2), (2, 3, 3, 2)))

# %%
# Rotations preserve norms.
v = rng.normal(size=(3, 16))
t = rotation_table_2d(np.array([(0, 1), (4, 4), (7, 2)]), 16)
print(np.linalg.norm(v, axis=1), np.linalg.norm(apply_rotation(v, t), axis=1))
