"""
Train a tiny model and sample from it
=====================================

The desk preset: 8x8 grids of 64 codes, eight classes, one constant pattern
per class.  Training takes well under a minute on one core.  Samples are
decoded through the codebook and written as PPM images.
"""

# %%
from pathlib import Path

import numpy as np

from dar.codebook import decode, make_codebook, render_pixels, write_ppm
from dar.harness.data import generate_dataset
from dar.harness.metrics import evaluate
from dar.harness.train import train
from dar.presets import DESK_DATASET, DESK_TRAIN
from dar.sampler import SamplingConfig, sample

out = Path("demo_out")
out.mkdir(exist_ok=True)

ds = generate_dataset(DESK_DATASET)
cb = make_codebook(DESK_DATASET.K, DESK_TRAIN.model.code_dim, seed=0)
print(len(ds), "grids, fingerprint", ds.fingerprint()[:12])

# %%
res = train(DESK_TRAIN, ds, cb, out_dir=out)
for step, lr, loss in res.log[::100]:
    print(f"step {step:4d} lr {lr:.2e} loss {loss:.4f}")
print("final", res.final_loss)

# %%
# Guided sampling.  With guidance 1 the unconditional pass is skipped.
for label in range(3):
    grids = sample(res.params, SamplingConfig(class_label=label, guidance_scale=2.0, seed=label, batch=2))
    print(label, np.unique(grids[0].tokens))
    write_ppm(out / f"class_{label}.ppm", render_pixels(decode(grids[0], cb)))

# %%
rep = evaluate(res.params, ds, cb, sample_count=4)
print(rep)
