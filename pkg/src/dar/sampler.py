"""Classifier-free-guided autoregressive sampling with KV caching."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np

from dar.codebook import TokenGrid
from dar.grid_scan import GridShape
from dar.model import KvCache, ModelParams, SequenceLayout, build_layout, forward
from dar.numerics import no_grad


@dataclass(frozen=True)
class SamplingConfig:
    guidance_scale: float = 1.0
    scale_power: float = 1.0
    temperature: float = 1.0
    class_label: int = 0
    seed: int = 0
    batch: int = 1
    argmax: bool = False

    def __post_init__(self) -> None:
        if self.guidance_scale < 1:
            raise ValueError("guidance_scale must be >= 1")
        if self.scale_power <= 0:
            raise ValueError("scale_power must be > 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def guidance_at(t: int, T: int, s: float, alpha: float) -> float:
    """Pow-cosine guidance weight for generating token ``t`` of ``T``.

    Rises from near 1 at the first token to exactly ``s`` at the last.
    """
    if not 0 <= t < T:
        raise ValueError(f"step {t} outside [0, {T})")
    u = ((t + 1) / T) ** alpha
    return 1.0 + (s - 1.0) * (1.0 - math.cos(math.pi * u)) / 2.0


def cfg_combine(cond: np.ndarray, uncond: np.ndarray, w: float) -> np.ndarray:
    cond, uncond = np.asarray(cond), np.asarray(uncond)
    if cond.shape != uncond.shape:
        raise ValueError(f"cond {cond.shape} and uncond {uncond.shape} differ")
    return uncond + w * (cond - uncond)


def softmax_np(logits: np.ndarray) -> np.ndarray:
    x = np.asarray(logits, dtype=np.float64)
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of ``probs`` by inverse-CDF on a uniform variate."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None] * cdf[..., -1:]
    return np.minimum((cdf <= u).sum(axis=-1), probs.shape[-1] - 1)


def sample_tokens(
    params: ModelParams,
    cfg: SamplingConfig,
    shape: GridShape | None = None,
    layout: SequenceLayout | None = None,
) -> np.ndarray:
    """Generate ``(batch, h, w)`` token grids for ``cfg.class_label``."""
    mc = params.config
    shape = shape or mc.shape
    if layout is None:
        layout = build_layout(shape, mc.scan)
    if layout.order.shape != shape:
        raise ValueError("layout shape does not match requested grid shape")
    if mc.adaln_condition == "class+timestep" and shape.T > mc.shape.T:
        raise ValueError(f"checkpoint supports at most {mc.shape.T} slots")
    if not 0 <= cfg.class_label < mc.num_classes:
        raise ValueError(f"class {cfg.class_label} outside [0, {mc.num_classes})")
    B, T = cfg.batch, shape.T
    guided = cfg.guidance_scale != 1.0
    classes = np.full(B, cfg.class_label, dtype=np.int64)
    if guided:
        classes = np.concatenate([classes, np.full(B, mc.null_class, dtype=np.int64)])
    rng = np.random.default_rng(cfg.seed)
    cache = KvCache.empty(mc.layers)
    seq = np.zeros((B, T), dtype=np.int64)
    feed = np.zeros((classes.shape[0], 1), dtype=np.int64)
    with no_grad():
        for t in range(T):
            logits = forward(params, feed, classes, layout, start=t, cache=cache).data[:, 0]
            logits = logits.astype(np.float64)
            if guided:
                w = guidance_at(t, T, cfg.guidance_scale, cfg.scale_power)
                logits = cfg_combine(logits[:B], logits[B:], w)
            if cfg.argmax:
                tok = np.argmax(logits, axis=-1)
            else:
                tok = sample_categorical(softmax_np(logits / cfg.temperature), rng)
            seq[:, t] = tok
            feed = np.concatenate([tok, tok])[:, None] if guided else tok[:, None]
    return layout.order.unflatten(seq)


def sample(
    params: ModelParams,
    cfg: SamplingConfig,
    shape: GridShape | None = None,
    layout: SequenceLayout | None = None,
) -> list[TokenGrid]:
    grids = sample_tokens(params, cfg, shape, layout)
    return [TokenGrid(g, cfg.class_label) for g in grids]


@dataclass(frozen=True)
class BenchResult:
    tokens_per_sec: float
    images_per_sec: float
    timings: list[float]
    batch: int
    tokens_per_image: int

    def to_dict(self) -> dict:
        return asdict(self)


def bench(
    params: ModelParams,
    batch: int,
    shape: GridShape | None = None,
    repeats: int = 5,
    guidance_scale: float = 1.0,
) -> BenchResult:
    """Median wall-clock sampling throughput over ``repeats`` runs."""
    shape = shape or params.config.shape
    layout = build_layout(shape, params.config.scan)
    cfg = SamplingConfig(guidance_scale=guidance_scale, batch=batch)
    timings = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        sample_tokens(params, cfg, shape, layout)
        timings.append(time.perf_counter() - t0)
    med = statistics.median(timings)
    tps = batch * shape.T / med
    return BenchResult(tps, tps / shape.T, timings, batch, shape.T)
