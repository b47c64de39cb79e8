"""Evaluation: held-out likelihood, sample statistics and a Fréchet proxy score."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from dar.codebook import Codebook, decode
from dar.harness.data import Dataset, train_val_split
from dar.model import ModelParams, build_layout, forward, nll_loss, sequence_io
from dar.numerics import no_grad
from dar.sampler import SamplingConfig, sample_tokens


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray


def gaussian_stats(features: np.ndarray) -> GaussianStats:
    """Mean and covariance of ``(n, d)`` feature rows (zero covariance for n < 2)."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] == 0:
        raise ValueError(f"features must be a non-empty (n, d) array, got {f.shape}")
    mu = f.mean(axis=0)
    if f.shape[0] < 2:
        return GaussianStats(mu, np.zeros((f.shape[1], f.shape[1])))
    return GaussianStats(mu, np.atleast_2d(np.cov(f, rowvar=False)))


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def frechet_gaussian(a: GaussianStats, b: GaussianStats, sym_tol: float = 1e-6) -> float:
    """Fréchet distance between two Gaussians.

    ``|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2})``, with the trace of
    the cross term taken as ``Tr((S_a^{1/2} S_b S_a^{1/2})^{1/2})`` and all
    square roots via eigendecomposition with negative eigenvalues clamped.
    """
    mu_a, mu_b = np.atleast_1d(a.mean).astype(np.float64), np.atleast_1d(b.mean).astype(np.float64)
    sa, sb = np.atleast_2d(a.cov).astype(np.float64), np.atleast_2d(b.cov).astype(np.float64)
    d = mu_a.shape[0]
    if mu_b.shape != (d,) or sa.shape != (d, d) or sb.shape != (d, d):
        raise ValueError("Gaussian statistics have mismatched dimensions")
    for name, s in (("a", sa), ("b", sb)):
        if np.max(np.abs(s - s.T), initial=0.0) > sym_tol * max(1.0, np.max(np.abs(s), initial=0.0)):
            raise ValueError(f"covariance {name} is not symmetric")
    sa, sb = (sa + sa.T) / 2, (sb + sb.T) / 2
    root_a = _psd_sqrt(sa)
    cross = root_a @ sb @ root_a
    tr_cross = np.sqrt(np.clip(np.linalg.eigvalsh((cross + cross.T) / 2), 0.0, None)).sum()
    diff = mu_a - mu_b
    score = float(diff @ diff + np.trace(sa) + np.trace(sb) - 2.0 * tr_cross)
    return max(score, 0.0)


def proxy_features(grids: np.ndarray, cb: Codebook) -> np.ndarray:
    """Per-sample mean of decoded code vectors: ``(n, h, w) -> (n, D)``."""
    return decode(np.asarray(grids), cb).mean(axis=(1, 2)).astype(np.float64)


def token_histogram(grids: np.ndarray, K: int) -> np.ndarray:
    counts = np.bincount(np.asarray(grids).reshape(-1), minlength=K).astype(np.float64)
    return counts / max(counts.sum(), 1.0)


def histogram_tv(a: np.ndarray, b: np.ndarray, K: int) -> float:
    """Total-variation distance between the token histograms of two grid sets."""
    return 0.5 * float(np.abs(token_histogram(a, K) - token_histogram(b, K)).sum())


@dataclass
class EvalReport:
    val_loss: float
    accuracy: float
    tv: float
    proxy_frechet: float
    fingerprint: str
    per_class_tv: list[float] = field(default_factory=list)
    samples_per_class: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def heldout_metrics(params: ModelParams, ds: Dataset, batch: int = 64) -> tuple[float, float]:
    """Mean NLL and next-token accuracy over ``ds`` (teacher forcing, eval mode)."""
    layout = build_layout(params.config.shape, params.config.scan)
    total_loss, correct, count = 0.0, 0, 0
    with no_grad():
        for s in range(0, len(ds), batch):
            grids, classes = ds.grids[s : s + batch], ds.classes[s : s + batch]
            inputs, targets = sequence_io(grids, layout)
            logits = forward(params, inputs, classes, layout)
            total_loss += float(nll_loss(logits, targets).data) * targets.size
            correct += int((logits.data.argmax(-1) == targets).sum())
            count += targets.size
    return total_loss / count, correct / count


def evaluate(
    params: ModelParams,
    dataset: Dataset,
    codebook: Codebook,
    sample_count: int = 8,
    sampling: SamplingConfig | None = None,
    seed: int = 0,
) -> EvalReport:
    """Score a model against ``dataset``.

    Loss and accuracy use the held-out split.  ``sample_count`` grids are
    drawn per class and compared with that class's training grids by token
    histogram TV; the proxy Fréchet score compares pooled decoded-feature
    statistics of all samples with those of the training split.
    """
    cfg = params.config
    if dataset.shape != cfg.shape or dataset.K != cfg.vocab_size:
        raise ValueError("dataset and checkpoint disagree on grid shape or vocabulary")
    train_idx, val_idx = train_val_split(dataset)
    train_set, val_set = dataset.subset(train_idx), dataset.subset(val_idx)
    val_loss, acc = heldout_metrics(params, val_set if len(val_set) else train_set)

    base = sampling or SamplingConfig()
    generated, tvs = [], []
    for k in range(cfg.num_classes):
        sc = SamplingConfig(
            base.guidance_scale, base.scale_power, base.temperature, k, seed + k, sample_count, base.argmax
        )
        grids = sample_tokens(params, sc)
        generated.append(grids)
        ref = train_set.grids[train_set.classes == k]
        tvs.append(histogram_tv(grids, ref, cfg.vocab_size) if len(ref) else 1.0)
    gen = np.concatenate(generated)
    fd = frechet_gaussian(
        gaussian_stats(proxy_features(gen, codebook)),
        gaussian_stats(proxy_features(train_set.grids, codebook)),
    )
    return EvalReport(
        val_loss=val_loss,
        accuracy=acc,
        tv=float(np.mean(tvs)),
        proxy_frechet=fd,
        fingerprint=cfg.fingerprint(),
        per_class_tv=[float(t) for t in tvs],
        samples_per_class=sample_count,
    )
