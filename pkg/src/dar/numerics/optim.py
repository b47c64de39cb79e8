"""AdamW with global-norm clipping, and the warmup + cosine learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LrSchedule:
    """Linear warmup from 0 to ``base_lr``, then cosine decay to ``ending_lr``.

    Spans are given in epochs and converted with ``steps_per_epoch``; both
    may be fractional.  The schedule is evaluated per optimizer step.
    """

    base_lr: float
    warmup_epochs: float
    total_epochs: float
    ending_lr: float = 1e-5
    steps_per_epoch: float = 1.0

    def __post_init__(self) -> None:
        if not 0 <= self.warmup_epochs <= self.total_epochs:
            raise ValueError("need 0 <= warmup_epochs <= total_epochs")
        if self.ending_lr > self.base_lr:
            raise ValueError("ending_lr must not exceed base_lr")
        if self.steps_per_epoch <= 0:
            raise ValueError("steps_per_epoch must be positive")

    @property
    def warmup_steps(self) -> float:
        return self.warmup_epochs * self.steps_per_epoch

    @property
    def total_steps(self) -> float:
        return self.total_epochs * self.steps_per_epoch


def lr_at(step: float, schedule: LrSchedule) -> float:
    if step < 0:
        raise ValueError("step must be >= 0")
    warm, total = schedule.warmup_steps, schedule.total_steps
    base, end = schedule.base_lr, schedule.ending_lr
    if step < warm:
        return base * step / warm
    if total <= warm:
        return base
    u = min(1.0, (step - warm) / (total - warm))
    return end + (base - end) * (1.0 + math.cos(math.pi * u)) / 2.0


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values()))


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients by ``max_norm / norm`` when the global norm exceeds ``max_norm``.

    Returns the (possibly) scaled gradients and the pre-clip norm.
    """
    norm = global_norm(grads)
    if max_norm <= 0 or norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return {k: (g * scale).astype(g.dtype, copy=False) for k, g in grads.items()}, norm


@dataclass(frozen=True)
class AdamWHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.96
    weight_decay: float = 0.05
    clip: float = 1.0
    eps: float = 1e-8


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    hyper: AdamWHyper,
) -> float:
    """Update ``params`` in place from ``grads``; returns the pre-clip gradient norm.

    Only parameters present in ``grads`` are touched, so frozen tables are
    simply left out of the gradient dict.
    """
    if hyper.lr <= 0:
        raise ValueError("lr must be positive")
    for k, g in grads.items():
        if k not in params:
            raise KeyError(f"gradient for unknown parameter {k!r}")
        if params[k].shape != g.shape:
            raise ValueError(f"{k}: grad shape {g.shape} != param shape {params[k].shape}")
    grads, norm = clip_by_global_norm(grads, hyper.clip)
    state.step += 1
    t = state.step
    b1, b2 = hyper.beta1, hyper.beta2
    c1, c2 = 1.0 - b1**t, 1.0 - b2**t
    for k, g in grads.items():
        p = params[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * np.square(g)
        update = (m / c1) / (np.sqrt(v / c2) + hyper.eps) + hyper.weight_decay * p
        p -= (hyper.lr * update).astype(p.dtype, copy=False)
    return norm
