"""Named configurations.

``tiny`` is the gradient-check model, ``desk`` the CPU-scale training
model, and ``reference_preset`` records the published B / L / XL settings for
config parity (never instantiated at desk scale).
"""

from __future__ import annotations

from dar.config import RunConfig, TrainConfig
from dar.harness.data import DatasetSpec
from dar.model import ModelConfig
from dar.sampler import SamplingConfig

TINY_MODEL = ModelConfig(
    layers=2,
    hidden_size=16,
    heads=4,
    vocab_size=16,
    code_dim=8,
    num_classes=4,
    grid_h=4,
    grid_w=4,
    scan="diagonal",
    rope_mode="2d",  # head_dim 4 is too narrow for 4d rope
    use_codebook_embeddings=True,
    adaln_condition="class+direction",
    dropout=0.0,
    attn_dropout=0.0,
    class_dropout=0.0,
)

# head_dim 8 variant so the 4d path is also gradient-checked
TINY_4D_MODEL = ModelConfig(**{**TINY_MODEL.to_dict(), "heads": 2, "rope_mode": "4d"})

DESK_MODEL = ModelConfig(
    layers=2,
    hidden_size=64,
    heads=4,
    vocab_size=64,
    code_dim=8,
    num_classes=8,
    grid_h=8,
    grid_w=8,
    scan="diagonal",
    rope_mode="4d",
    use_codebook_embeddings=True,
    adaln_condition="class+direction",
    dropout=0.1,
    attn_dropout=0.1,
    class_dropout=0.1,
)

DESK_DATASET = DatasetSpec(h=8, w=8, K=64, num_classes=8, samples_per_class=32, noise_rate=0.0, family="constant")

DESK_TRAIN = TrainConfig(model=DESK_MODEL, batch_size=16, steps=600, lr=1e-3, warmup_steps=60, ending_lr=1e-5)


def desk_run_config() -> RunConfig:
    return RunConfig(model=DESK_MODEL, train=DESK_TRAIN, sample=SamplingConfig(), dataset=DESK_DATASET)


def tiny_run_config() -> RunConfig:
    ds = DatasetSpec(h=4, w=4, K=16, num_classes=4, samples_per_class=8)
    return RunConfig(model=TINY_MODEL, train=TrainConfig(model=TINY_MODEL), dataset=ds)


_SIZES = {
    # layers, hidden, heads, base lr, temperature, scale power, guidance scale
    "B": (24, 1024, 16, 1e-3, 1.02, 0.88, 4.7),
    "L": (36, 1280, 20, 4e-4, 1.04, 0.78, 4.5),
    "XL": (48, 1536, 24, 4e-4, 1.02, 0.56, 4.3),
}

REFERENCE_PARAM_COUNTS = {"B": 485_000_000, "L": 1_117_000_000, "XL": 2_077_000_000}


def reference_model(size: str) -> ModelConfig:
    layers, hidden, heads, *_ = _SIZES[size]
    return ModelConfig(
        layers=layers,
        hidden_size=hidden,
        heads=heads,
        vocab_size=16384,
        code_dim=256,
        num_classes=1000,
        grid_h=16,
        grid_w=16,
        scan="diagonal",
        rope_mode="4d",
        use_codebook_embeddings=True,
        adaln_condition="class+direction",
        dropout=0.1,
        attn_dropout=0.1,
        class_dropout=0.1,
    )


def reference_preset(size: str) -> dict:
    """Serializable published hyper-parameters for model size ``B``, ``L`` or ``XL``."""
    if size not in _SIZES:
        raise KeyError(f"unknown reference preset {size!r}; expected one of {sorted(_SIZES)}")
    _, _, _, lr, temp, power, scale = _SIZES[size]
    return {
        "name": f"reference-{size}",
        "model": reference_model(size).to_dict(),
        "train": {
            "optimizer": "AdamW",
            "lr": lr,
            "betas": [0.9, 0.96],
            "weight_decay": 0.05,
            "batch_size": 2048,
            "lr_schedule": "cosine",
            "ending_lr": 1e-5,
            "total_epochs": 400,
            "warmup_epochs": 100,
            "precision": "bfloat16",
            "max_grad_norm": 1.0,
            "dropout": 0.1,
            "attn_dropout": 0.1,
            "class_dropout": 0.1,
        },
        "sample": {
            "guidance_schedule": "pow-cosine",
            "temperature": temp,
            "scale_power": power,
            "guidance_scale": scale,
        },
    }


def reference_presets() -> dict:
    return {size: reference_preset(size) for size in _SIZES}


def reference_sampling(size: str, class_label: int = 0, seed: int = 0, batch: int = 1) -> SamplingConfig:
    _, _, _, _, temp, power, scale = _SIZES[size]
    return SamplingConfig(scale, power, temp, class_label, seed, batch)
