"""Controlled module ablations at desk scale.

Two matrices share one dataset and one seed:

* modules: scan order x {codebook embeddings, 4D rope, direction embeddings}
  in eight combinations;
* AdaLN condition: class / class+timestep / class+direction on the
  diagonal + codebook + 4D model.
"""

from __future__ import annotations

import json
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from dar.codebook import Codebook
from dar.config import TrainConfig
from dar.harness.data import Dataset
from dar.harness.metrics import evaluate
from dar.harness.train import train
from dar.sampler import SamplingConfig

log = logging.getLogger(__name__)

# name, scan, codebook embeddings, 4d rope, direction embeddings
MODULE_ROWS = [
    ("raster", "raster", False, False, False),
    ("raster+code+4d+dir", "raster", True, True, True),
    ("diagonal", "diagonal", False, False, False),
    ("diagonal+4d+dir", "diagonal", False, True, True),
    ("diagonal+code", "diagonal", True, False, False),
    ("diagonal+code+4d", "diagonal", True, True, False),
    ("diagonal+code+dir", "diagonal", True, False, True),
    ("diagonal+code+4d+dir", "diagonal", True, True, True),
]

ADALN_ROWS = [
    ("adaln:class", "class"),
    ("adaln:class+timestep", "class+timestep"),
    ("adaln:class+direction", "class+direction"),
]


def ablation_rows(base: TrainConfig) -> list[dict]:
    """The eleven row specs, each with its full train config."""
    rows = []
    for name, scan, code, four_d, direction in MODULE_ROWS:
        model = replace(
            base.model,
            scan=scan,
            use_codebook_embeddings=code,
            rope_mode="4d" if four_d else "2d",
            adaln_condition="class+direction" if direction else "class",
        )
        rows.append(
            {
                "table": "modules",
                "name": name,
                "scan": scan,
                "codebook": code,
                "rope_4d": four_d,
                "direction": direction,
                "config": replace(base, model=model),
            }
        )
    for name, cond in ADALN_ROWS:
        model = replace(
            base.model, scan="diagonal", use_codebook_embeddings=True, rope_mode="4d", adaln_condition=cond
        )
        rows.append({"table": "adaln", "name": name, "adaln_condition": cond, "config": replace(base, model=model)})
    return rows


def _run_row(row: dict, dataset: Dataset, codebook: Codebook, sample_count: int, sampling: SamplingConfig) -> dict:
    cfg: TrainConfig = row["config"]
    out = {k: v for k, v in row.items() if k != "config"}
    out["seed"] = cfg.seed
    out["dataset_fingerprint"] = dataset.fingerprint()
    out["model"] = cfg.model.to_dict()
    try:
        result = train(cfg, dataset, codebook)
        report = evaluate(result.params, dataset, codebook, sample_count, sampling, seed=cfg.seed)
        out["final_train_loss"] = result.final_loss
        out["report"] = report.to_dict()
        out["error"] = None
    except Exception as e:  # recorded; other rows still run
        out["report"] = None
        out["error"] = f"{type(e).__name__}: {e}"
        out["traceback"] = traceback.format_exc()
    return out


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("DAR_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def ablate(
    base: TrainConfig,
    dataset: Dataset,
    codebook: Codebook,
    out_path: str | Path | None = None,
    sample_count: int = 4,
    sampling: SamplingConfig | None = None,
    workers: int | None = None,
) -> dict:
    """Run both ablation matrices and return (and optionally write) the report."""
    sampling = sampling or SamplingConfig()
    rows = ablation_rows(base)
    n = worker_count(workers)
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            futures = [pool.submit(_run_row, r, dataset, codebook, sample_count, sampling) for r in rows]
            results = [f.result() for f in futures]
    else:
        results = []
        for r in rows:
            log.info("ablation row %s", r["name"])
            results.append(_run_row(r, dataset, codebook, sample_count, sampling))
    report = {
        "dataset_fingerprint": dataset.fingerprint(),
        "seed": base.seed,
        "steps": base.steps,
        "rows": results,
        "table": format_table(results),
    }
    if out_path is not None:
        Path(out_path).write_text(json.dumps(report, indent=2, sort_keys=True))
    return report


def format_table(results: list[dict]) -> str:
    head = "| table | row | val loss | accuracy | TV | proxy FD |\n|---|---|---|---|---|---|"
    lines = [head]
    for r in results:
        rep = r.get("report")
        if rep is None:
            lines.append(f"| {r['table']} | {r['name']} | failed: {r['error']} | | | |")
            continue
        lines.append(
            f"| {r['table']} | {r['name']} | {rep['val_loss']:.4f} | {rep['accuracy']:.4f} "
            f"| {rep['tv']:.4f} | {rep['proxy_frechet']:.4f} |"
        )
    return "\n".join(lines)
