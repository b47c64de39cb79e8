"""Training loop: shuffled mini-batches, AdamW, warmup + cosine schedule."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dar.checkpoint import save_checkpoint
from dar.codebook import Codebook
from dar.config import TrainConfig
from dar.harness.data import Dataset, train_val_split
from dar.model import ModelParams, batch_loss, build_layout, init_model
from dar.numerics import NonFiniteError, OptimizerState, adamw_step, lr_at

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class TrainResult:
    params: ModelParams
    log: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.log[-1][2]

    def log_csv(self) -> str:
        return format_loss_log(self.log)


def format_loss_log(rows: list[tuple[int, float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "lr", "loss"])
    for step, lr, loss in rows:
        w.writerow([step, repr(lr), repr(loss)])
    return buf.getvalue()


def _batches(n: int, batch: int, rng: np.random.Generator):
    while True:
        perm = rng.permutation(n)
        if n < batch:
            perm = np.resize(perm, batch)
        for s in range(0, len(perm) - batch + 1, batch):
            yield perm[s : s + batch]


def train(
    config: TrainConfig,
    dataset: Dataset,
    codebook: Codebook,
    out_dir: str | Path | None = None,
    params: ModelParams | None = None,
) -> TrainResult:
    """Train on the training split of ``dataset``.

    Optimizer step ``k`` (1-based) uses ``lr_at(k)``, so the last step runs
    at the ending learning rate.  With ``out_dir`` the loss log is written
    to ``loss.csv`` and checkpoints to ``checkpoint.darck`` (plus
    ``checkpoint_<step>.darck`` every ``checkpoint_every`` steps).
    """
    mcfg = config.model
    if dataset.shape != mcfg.shape:
        raise ValueError(f"dataset grid {dataset.shape} != model grid {mcfg.shape}")
    if dataset.K != mcfg.vocab_size or dataset.num_classes != mcfg.num_classes:
        raise ValueError("dataset K / num_classes do not match the model config")
    init_ss, shuffle_ss, drop_ss = np.random.SeedSequence(config.seed).spawn(3)
    if params is None:
        params = init_model(mcfg, codebook, seed=int(init_ss.generate_state(1)[0]))
    layout = build_layout(mcfg.shape, mcfg.scan)
    train_idx, _ = train_val_split(dataset)
    train_set = dataset.subset(train_idx)
    batches = _batches(len(train_set), config.batch_size, np.random.default_rng(shuffle_ss))
    drop_rng = np.random.default_rng(drop_ss)
    schedule = config.schedule()
    state = OptimizerState()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    rows: list[tuple[int, float, float]] = []
    trainable = params.trainable()
    arrays = {k: t.data for k, t in trainable.items()}

    for step in range(1, config.steps + 1):
        idx = next(batches)
        lr = lr_at(step, schedule)
        params.zero_grad()
        try:
            loss = batch_loss(
                params, train_set.grids[idx], train_set.classes[idx], layout, train=True, rng=drop_rng
            )
        except NonFiniteError as e:
            _flush(out, rows)
            raise TrainingError(step, str(e)) from None
        value = float(loss.data)
        if not np.isfinite(value):
            _flush(out, rows)
            raise TrainingError(step, f"non-finite loss {value}")
        loss.backward()
        adamw_step(arrays, params.grads(), state, config.adamw(lr))
        rows.append((step, lr, value))
        if step % 100 == 0:
            log.info("step %d lr %.3g loss %.4f", step, lr, value)
        if out is not None and config.checkpoint_every and step % config.checkpoint_every == 0:
            save_checkpoint(params, out / f"checkpoint_{step}.darck", {"step": step})

    _flush(out, rows)
    if out is not None:
        save_checkpoint(params, out / "checkpoint.darck", {"step": config.steps, "seed": config.seed})
    return TrainResult(params, rows)


def _flush(out: Path | None, rows) -> None:
    if out is not None:
        (out / "loss.csv").write_text(format_loss_log(rows))
