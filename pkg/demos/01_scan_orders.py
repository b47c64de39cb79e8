"""
Raster and diagonal scans
=========================

Two ways to flatten a grid into a sequence. The raster scan jumps back to
column 0 at every row end; the diagonal zigzag never moves further than one
diagonal step.
"""

# %%
import numpy as np

from dar.grid_scan import GridShape, adjacency_stats, make_order

shape = GridShape(4, 5)

# %%
# Visit index of every cell, drawn as a grid.
for kind in ("raster", "diagonal"):
    order = make_order(shape, kind)
    visit = np.empty((shape.h, shape.w), dtype=int)
    visit[order.coords[:, 0], order.coords[:, 1]] = np.arange(len(order))
    print(kind)
    print(visit)

# %%
# Each step carries a direction label.
diag = make_order(shape, "diagonal")
print([d.label for d in diag.directions[:8]])

# %%
# Step lengths: the raster line break costs hypot(w - 1, 1).
for kind in ("raster", "diagonal"):
    s = adjacency_stats(make_order(shape, kind))
    print(f"{kind:8s} max {s.max_step_dist:.3f} mean {s.mean_step_dist:.3f} {s.direction_histogram}")
