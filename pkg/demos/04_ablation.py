"""
Ablation at desk scale
======================

Eight module rows (scan order, rotary mode, direction conditioning, codebook
embeddings) and three AdaLN conditioning rows, all trained with one seed on
one dataset.  Serially this takes several minutes; set DAR_THREADS to cap
worker processes.
"""

# %%
from dar.codebook import make_codebook
from dar.harness.ablate import ablate
from dar.harness.data import generate_dataset
from dar.presets import DESK_DATASET, DESK_TRAIN

ds = generate_dataset(DESK_DATASET)
cb = make_codebook(DESK_DATASET.K, DESK_TRAIN.model.code_dim, seed=0)

# %%
report = ablate(DESK_TRAIN, ds, cb, out_path="ablation.json", sample_count=4)
print(report["table"])
