import math
from dataclasses import replace

import numpy as np
import pytest
from conftest import tiny_params

from dar.checkpoint import CheckpointError, checkpoint_from_bytes, checkpoint_to_bytes
from dar.codebook import make_codebook
from dar.config import TrainConfig
from dar.grid_scan import Direction, GridShape
from dar.harness.data import DatasetSpec, generate_dataset
from dar.harness.train import train
from dar.model import (
    ModelParams,
    batch_loss,
    build_layout,
    count_params,
    forward,
    init_model,
    sequence_io,
)
from dar.numerics import no_grad
from dar.presets import DESK_MODEL, TINY_4D_MODEL, TINY_MODEL


def logits_of(params, grids, classes, layout=None):
    layout = layout or build_layout(params.config.shape, params.config.scan)
    inputs, _ = sequence_io(grids, layout)
    with no_grad():
        return forward(params, inputs, np.asarray(classes), layout).data


def rand_grids(cfg, n, seed=0):
    return np.random.default_rng(seed).integers(0, cfg.vocab_size, (n, cfg.grid_h, cfg.grid_w))


def test_layout_diagonal_3x3():
    lay = build_layout(GridShape(3, 3), "diagonal")
    assert tuple(lay.cur[0]) == (-1, -1) and tuple(lay.nxt[0]) == (0, 0)
    assert lay.directions[0] == Direction.START
    assert tuple(lay.cur[1]) == (0, 0) and tuple(lay.nxt[1]) == (1, 0)
    assert lay.directions[1] == Direction.DOWN
    assert lay.input_len == lay.target_len == 9
    # every slot's nxt is the next slot's cur
    assert np.array_equal(lay.nxt[:-1], lay.cur[1:])


def test_sequence_io_shift():
    lay = build_layout(GridShape(2, 2), "diagonal")
    inputs, targets = sequence_io(np.array([[[1, 2], [3, 4]]]), lay)
    assert targets.tolist() == [[1, 3, 2, 4]]
    assert inputs.tolist() == [[0, 1, 3, 2]]


def test_param_count_stable():
    cb = make_codebook(64, 8, 0)
    a, b = init_model(DESK_MODEL, cb, seed=3), init_model(DESK_MODEL, cb, seed=3)
    assert a.num_params() == b.num_params() == count_params(DESK_MODEL)
    manual = sum(t.data.size for t in a.tensors.values())
    assert a.num_params() == manual
    assert all(np.array_equal(a[k].data, b[k].data) for k in a.tensors)


def test_param_count_excludes_unused_codebook():
    cfg = replace(TINY_MODEL, use_codebook_embeddings=False)
    p = init_model(cfg, make_codebook(16, 8, 0))
    assert count_params(cfg) == sum(t.data.size for k, t in p.tensors.items() if k != "codebook")


def test_initial_loss_near_log_k():
    cfg = DESK_MODEL
    p = init_model(cfg, make_codebook(64, 8, 0), seed=0)
    lay = build_layout(cfg.shape, cfg.scan)
    loss = float(batch_loss(p, rand_grids(cfg, 8), np.arange(8), lay).data)
    assert loss == pytest.approx(math.log(64), abs=0.1)


@pytest.mark.parametrize("cfg", [TINY_MODEL, TINY_4D_MODEL], ids=["2d", "4d"])
def test_causality_bitwise(cfg):
    params = tiny_params(cfg, dtype=np.float32)
    lay = build_layout(cfg.shape, cfg.scan)
    rng = np.random.default_rng(4)
    for _ in range(50):
        grids = rand_grids(cfg, 2, int(rng.integers(1 << 30)))
        inputs, _ = sequence_io(grids, lay)
        j = int(rng.integers(1, lay.input_len))
        changed = inputs.copy()
        changed[:, j:] = rng.integers(0, cfg.vocab_size, changed[:, j:].shape)
        with no_grad():
            a = forward(params, inputs, np.array([0, 1]), lay).data
            b = forward(params, changed, np.array([0, 1]), lay).data
        assert np.array_equal(a[:, :j], b[:, :j])


def test_zero_init_adaln_is_identity():
    cfg = TINY_4D_MODEL
    p = init_model(cfg, make_codebook(16, 8, 0), seed=0)
    bare_cfg = replace(cfg, adaln_condition="none")
    bare = ModelParams(bare_cfg, {k: t for k, t in p.tensors.items() if "ada_" not in k and k != "dir_emb"})
    assert set(bare.tensors) == set(init_model(bare_cfg, make_codebook(16, 8, 0)).tensors)
    g = rand_grids(cfg, 3)
    assert np.array_equal(logits_of(p, g, [0, 1, 2]), logits_of(bare, g, [0, 1, 2]))


def test_direction_sensitivity_4d(tiny4d):
    lay = build_layout(tiny4d.config.shape, "diagonal")
    slot = 5
    other = lay.with_nxt(slot, (3, 3))
    g = rand_grids(tiny4d.config, 2)
    a, b = logits_of(tiny4d, g, [0, 1], lay), logits_of(tiny4d, g, [0, 1], other)
    assert not np.allclose(a[:, slot], b[:, slot])
    assert np.array_equal(a[:, :slot], b[:, :slot])


def test_direction_blind_2d_without_direction_embedding():
    cfg = replace(TINY_MODEL, adaln_condition="class")
    p = tiny_params(cfg)
    lay = build_layout(cfg.shape, "diagonal")
    other = lay.with_nxt(5, (3, 3)).with_directions(np.roll(lay.directions, 1))
    g = rand_grids(cfg, 2)
    assert np.array_equal(logits_of(p, g, [0, 1], lay), logits_of(p, g, [0, 1], other))


def test_class_changes_logits(tiny4d):
    g = rand_grids(tiny4d.config, 1)
    assert not np.allclose(logits_of(tiny4d, g, [0]), logits_of(tiny4d, g, [1]))


def test_direction_embedding_changes_logits(tiny4d):
    lay = build_layout(tiny4d.config.shape, "diagonal")
    dirs = lay.directions.copy()
    dirs[4] = Direction.RIGHT if dirs[4] != Direction.RIGHT else Direction.DOWN
    g = rand_grids(tiny4d.config, 1)
    a, b = logits_of(tiny4d, g, [0], lay), logits_of(tiny4d, g, [0], lay.with_directions(dirs))
    assert not np.allclose(a[:, 4], b[:, 4])


def test_timestep_condition_runs():
    p = tiny_params(replace(TINY_4D_MODEL, adaln_condition="class+timestep"))
    assert "time_emb" in p.tensors and p["time_emb"].shape[0] == 16
    assert np.isfinite(logits_of(p, rand_grids(p.config, 2), [0, 3])).all()


def test_rms_probe_unit_rows(tiny4d):
    seen = {}

    def probe(name, x):
        seen[name] = np.sqrt(np.mean(np.square(x.astype(np.float64)), axis=-1))

    lay = build_layout(tiny4d.config.shape, "diagonal")
    inputs, _ = sequence_io(rand_grids(tiny4d.config, 2), lay)
    with no_grad():
        forward(tiny4d.astype(np.float32), inputs, np.array([0, 1]), lay, probe=probe)
    assert len(seen) == 2 * tiny4d.config.layers + 1
    for name, rms in seen.items():
        assert np.all(np.abs(rms - 1) < 1e-5), name


def test_bad_inputs_rejected(tiny4d):
    lay = build_layout(tiny4d.config.shape, "diagonal")
    with pytest.raises(ValueError):
        forward(tiny4d, np.zeros((1, 17), int), np.array([0]), lay)
    with pytest.raises(ValueError):
        forward(tiny4d, np.zeros((1, 16), int), np.array([9]), lay)
    with pytest.raises(ValueError):
        replace(TINY_MODEL, rope_mode="4d")  # head_dim 4


def test_codebook_gets_no_gradient(tiny4d):
    lay = build_layout(tiny4d.config.shape, "diagonal")
    loss = batch_loss(tiny4d, rand_grids(tiny4d.config, 2), [0, 1], lay)
    loss.backward()
    assert tiny4d["codebook"].grad is None
    assert np.any(tiny4d["embed.w1"].grad)


def test_frozen_codebook_after_training():
    cfg = replace(TINY_4D_MODEL, dropout=0.1, class_dropout=0.1)
    ds = generate_dataset(DatasetSpec(h=4, w=4, K=16, num_classes=4, samples_per_class=8))
    cb = make_codebook(16, 8, 0)
    p0 = init_model(cfg, cb, seed=0)
    before = {k: t.data.copy() for k, t in p0.tensors.items()}
    res = train(TrainConfig(model=cfg, steps=100, batch_size=8, warmup_steps=10), ds, cb, params=p0)
    assert res.params["codebook"].data.tobytes() == before["codebook"].tobytes()
    assert not np.array_equal(res.params["embed.w1"].data, before["embed.w1"])


def test_checkpoint_roundtrip(tiny4d):
    p = tiny4d.astype(np.float32)
    blob = checkpoint_to_bytes(p, {"step": 3})
    q, header = checkpoint_from_bytes(blob)
    assert header["meta"] == {"step": 3} and header["fingerprint"] == p.config.fingerprint()
    assert q.config == p.config
    assert all(np.array_equal(p[k].data, q[k].data) for k in p.tensors)
    assert not q["codebook"].requires_grad
    assert checkpoint_to_bytes(q, {"step": 3}) == blob


@pytest.mark.parametrize("pos", [0, 20, -10])
def test_checkpoint_corruption(tiny4d, pos):
    blob = bytearray(checkpoint_to_bytes(tiny4d.astype(np.float32)))
    blob[pos] ^= 0x40
    with pytest.raises(CheckpointError):
        checkpoint_from_bytes(bytes(blob))
