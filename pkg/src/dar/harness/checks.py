"""Whole-model gradient check against central finite differences."""

from __future__ import annotations

import numpy as np

from dar.codebook import make_codebook
from dar.model import ModelConfig, ModelParams, batch_loss, build_layout, init_model
from dar.numerics import grad_check


def randomize(params: ModelParams, rng: np.random.Generator) -> None:
    """Move zero-initialized and unit-gain parameters off their special values.

    At init AdaLN projections are zero, which hides every gradient path
    through the condition embeddings; a check there would be vacuous.
    """
    for name, t in params.trainable().items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.endswith("norm"):
            t.data[...] = 1.0 + rng.normal(0.0, 0.2, t.shape)
        elif leaf in ("ada_w", "ada_b", "head_b") or leaf.startswith("b"):
            t.data[...] = rng.normal(0.0, 0.3, t.shape)
        elif name.endswith("_emb"):
            t.data[...] = rng.normal(0.0, 0.5, t.shape)


def model_gradcheck(
    cfg: ModelConfig, seed: int = 0, batch: int = 2, eps: float = 1e-6
) -> dict[str, float]:
    """Max relative error per parameter for the eval-mode loss in float64."""
    rng = np.random.default_rng(seed)
    cb = make_codebook(cfg.vocab_size, cfg.code_dim, seed)
    params = init_model(cfg, cb, seed=seed, dtype=np.float64)
    randomize(params, rng)
    layout = build_layout(cfg.shape, cfg.scan)
    grids = rng.integers(0, cfg.vocab_size, (batch, cfg.grid_h, cfg.grid_w))
    classes = rng.integers(0, cfg.num_classes, batch)

    def f(tensors):
        return batch_loss(params, grids, classes, layout)

    return grad_check(f, params.tensors, eps=eps)
