"""Direction-aware autoregressive transformer over scanned token grids.

Sequence layout for an ``h x w`` grid scanned into ``x_1 .. x_T``::

    slot      0        1        2     ...   T-1
    input   class     x_1      x_2    ...  x_{T-1}
    target   x_1      x_2      x_3    ...   x_T
    cur    (-1,-1)    p_1      p_2    ...  p_{T-1}
    nxt      p_1      p_2      p_3    ...   p_T
    dir     Start   d(1->2)  d(2->3)  ...  d(T-1->T)

Each block is pre-norm: ``x + Attn(mod(RMSNorm(x)))`` then
``x + FFN(mod(RMSNorm(x)))`` where ``mod(h) = (1 + scale) * h + shift`` and
shift/scale come from a per-layer projection of the slot condition (class
embedding, plus a direction or slot embedding depending on config).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable

import numpy as np

from dar import numerics as nx
from dar.codebook import Codebook
from dar.grid_scan import Direction, GridShape, ScanOrder, make_order
from dar.numerics import Tensor
from dar.rope import RopeMode, RotationTable, check_head_dim, rotation_table_2d, rotation_table_4d

SCANS = ("raster", "diagonal")
ADALN_CONDITIONS = ("none", "class", "class+timestep", "class+direction")
NUM_DIRECTIONS = len(Direction)

Probe = Callable[[str, np.ndarray], None]


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    hidden_size: int = 64
    heads: int = 4
    vocab_size: int = 64
    code_dim: int = 8
    num_classes: int = 8
    grid_h: int = 8
    grid_w: int = 8
    scan: str = "diagonal"
    rope_mode: str = "4d"
    use_codebook_embeddings: bool = True
    adaln_condition: str = "class+direction"
    dropout: float = 0.1
    attn_dropout: float = 0.1
    class_dropout: float = 0.1
    ffn_hidden: int = 0  # 0 -> round(3.5 * hidden_size)
    norm_eps: float = 1e-6

    def __post_init__(self) -> None:
        if self.layers < 1 or self.heads < 1 or self.hidden_size < 1:
            raise ValueError("layers, heads and hidden_size must be positive")
        if self.hidden_size % self.heads:
            raise ValueError(f"hidden_size {self.hidden_size} not divisible by heads {self.heads}")
        if self.scan not in SCANS:
            raise ValueError(f"scan must be one of {SCANS}, got {self.scan!r}")
        if self.adaln_condition not in ADALN_CONDITIONS:
            raise ValueError(f"adaln_condition must be one of {ADALN_CONDITIONS}")
        check_head_dim(self.head_dim, RopeMode(self.rope_mode))
        if self.vocab_size < 2 or self.num_classes < 1 or self.code_dim < 1:
            raise ValueError("vocab_size >= 2, num_classes >= 1, code_dim >= 1 required")
        GridShape(self.grid_h, self.grid_w)
        for name in ("dropout", "attn_dropout", "class_dropout"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.hidden_size // self.heads

    @property
    def ffn_size(self) -> int:
        return self.ffn_hidden or int(round(3.5 * self.hidden_size))

    @property
    def shape(self) -> GridShape:
        return GridShape(self.grid_h, self.grid_w)

    @property
    def null_class(self) -> int:
        return self.num_classes

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------- layout


@dataclass(frozen=True, eq=False)
class SequenceLayout:
    order: ScanOrder
    cur: np.ndarray  # (T, 2)
    nxt: np.ndarray  # (T, 2)
    directions: np.ndarray  # (T,) Direction values

    @property
    def input_len(self) -> int:
        return self.cur.shape[0]

    @property
    def target_len(self) -> int:
        return len(self.order)

    def rotation_table(self, mode: RopeMode | str, head_dim: int) -> RotationTable:
        if RopeMode(mode) is RopeMode.TWO_D:
            return rotation_table_2d(self.cur, head_dim)
        return rotation_table_4d(np.concatenate([self.cur, self.nxt], axis=1), head_dim)

    def with_nxt(self, slot: int, nxt: tuple[int, int]) -> "SequenceLayout":
        n = self.nxt.copy()
        n[slot] = nxt
        return replace(self, nxt=n)

    def with_directions(self, directions) -> "SequenceLayout":
        return replace(self, directions=np.asarray(directions, dtype=np.int64))


def build_layout(shape: GridShape, scan: str) -> SequenceLayout:
    order = make_order(shape, scan)
    c = order.coords
    cur = np.concatenate([[[-1, -1]], c[:-1]]).astype(np.int64)
    nxt = c.copy()
    dirs = np.array([Direction.START, *order.directions], dtype=np.int64)
    return SequenceLayout(order, cur, nxt, dirs)


# ------------------------------------------------------------------ parameters


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    H, K, D, F = cfg.hidden_size, cfg.vocab_size, cfg.code_dim, cfg.ffn_size
    s: dict[str, tuple[int, ...]] = {"codebook": (K, D)}
    if cfg.use_codebook_embeddings:
        s.update({"embed.w1": (D, H), "embed.b1": (H,), "embed.w2": (H, H), "embed.b2": (H,)})
    else:
        s["tok_emb"] = (K, H)
    s["class_emb"] = (cfg.num_classes + 1, H)
    if cfg.adaln_condition == "class+direction":
        s["dir_emb"] = (NUM_DIRECTIONS, H)
    elif cfg.adaln_condition == "class+timestep":
        s["time_emb"] = (cfg.shape.T, H)
    for i in range(cfg.layers):
        p = f"layers.{i}."
        s[p + "attn_norm"] = (H,)
        for w in ("wq", "wk", "wv", "wo"):
            s[p + w] = (H, H)
        s[p + "ffn_norm"] = (H,)
        s[p + "w_gate"] = (H, F)
        s[p + "w_up"] = (H, F)
        s[p + "w_down"] = (F, H)
        if cfg.adaln_condition != "none":
            s[p + "ada_w"] = (H, 4 * H)
            s[p + "ada_b"] = (4 * H,)
    s["final_norm"] = (H,)
    s["head_w"] = (H, K)
    s["head_b"] = (K,)
    return s


def count_params(cfg: ModelConfig) -> int:
    """Parameter count; the frozen codebook counts only when it embeds tokens."""
    total = 0
    for name, shape in param_shapes(cfg).items():
        if name == "codebook" and not cfg.use_codebook_embeddings:
            continue
        total += math.prod(shape)
    return total


FROZEN = frozenset({"codebook"})


@dataclass(eq=False)
class ModelParams:
    config: ModelConfig
    tensors: dict[str, Tensor] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    @property
    def dtype(self):
        return self.tensors["head_w"].dtype

    def trainable(self) -> dict[str, Tensor]:
        return {k: t for k, t in self.tensors.items() if k not in FROZEN}

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self.tensors.items()}

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {
            k: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for k, t in self.trainable().items()
        }

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            self.config,
            {
                k: Tensor(t.data.astype(dtype), requires_grad=t.requires_grad, name=k)
                for k, t in self.tensors.items()
            },
        )

    def copy(self) -> "ModelParams":
        return self.astype(self.dtype)

    def num_params(self) -> int:
        return count_params(self.config)


def init_model(cfg: ModelConfig, codebook: Codebook, seed: int = 0, dtype=np.float32) -> ModelParams:
    if codebook.K != cfg.vocab_size or codebook.D != cfg.code_dim:
        raise ValueError(
            f"codebook is {codebook.K}x{codebook.D} but config expects "
            f"{cfg.vocab_size}x{cfg.code_dim}"
        )
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if name == "codebook":
            data = codebook.codes.copy()
        elif leaf.endswith("norm"):
            data = np.ones(shape)
        elif leaf in ("ada_w", "ada_b", "head_b") or leaf.startswith("b"):
            data = np.zeros(shape)
        elif name.endswith("_emb") or name == "head_w":
            data = rng.normal(0.0, 0.02, shape)
        else:
            data = rng.normal(0.0, 1.0 / math.sqrt(shape[0]), shape)
        tensors[name] = Tensor(data.astype(dtype), requires_grad=name not in FROZEN, name=name)
    return ModelParams(cfg, tensors)


# ----------------------------------------------------------------------- cache


@dataclass
class KvCache:
    """Per-layer keys/values of the slots consumed so far, ``(B, heads, len, head_dim)``."""

    k: list[np.ndarray | None]
    v: list[np.ndarray | None]
    length: int = 0

    @classmethod
    def empty(cls, layers: int) -> "KvCache":
        return cls([None] * layers, [None] * layers, 0)

    def extend(self, layer: int, k: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.k[layer] is None:
            self.k[layer], self.v[layer] = k, v
        else:
            self.k[layer] = np.concatenate([self.k[layer], k], axis=2)
            self.v[layer] = np.concatenate([self.v[layer], v], axis=2)
        return self.k[layer], self.v[layer]


# --------------------------------------------------------------------- forward


def embed_tokens(params: ModelParams, ids: np.ndarray) -> Tensor:
    cfg = params.config
    if not cfg.use_codebook_embeddings:
        return nx.embedding(params["tok_emb"], ids)
    e = nx.embedding(params["codebook"], ids)
    h = nx.silu(e @ params["embed.w1"] + params["embed.b1"])
    return h @ params["embed.w2"] + params["embed.b2"]


def _condition(params: ModelParams, classes: np.ndarray, layout: SequenceLayout, start: int, n: int) -> Tensor:
    cfg = params.config
    B = classes.shape[0]
    cond = nx.embedding(params["class_emb"], classes).reshape(B, 1, cfg.hidden_size)
    if cfg.adaln_condition == "class+direction":
        cond = cond + nx.embedding(params["dir_emb"], layout.directions[start : start + n])
    elif cfg.adaln_condition == "class+timestep":
        cond = cond + nx.embedding(params["time_emb"], np.arange(start, start + n))
    return cond


def _modulate(h: Tensor, shift: Tensor, scale: Tensor) -> Tensor:
    return h + h * scale + shift


def forward(
    params: ModelParams,
    slot_tokens: np.ndarray,
    classes: np.ndarray,
    layout: SequenceLayout,
    *,
    start: int = 0,
    train: bool = False,
    rng: np.random.Generator | None = None,
    cache: KvCache | None = None,
    probe: Probe | None = None,
) -> Tensor:
    """Logits ``(B, n, K)`` for slots ``start .. start+n-1``.

    ``slot_tokens[:, i]`` is the image token fed at slot ``start + i``; the
    entry for slot 0 is ignored because that slot carries the class token.
    With a ``cache`` the new keys/values are appended and attention spans
    every cached slot.  ``rng`` drives dropout and is required when
    ``train`` is set and any dropout rate is nonzero.
    """
    cfg = params.config
    slot_tokens = np.asarray(slot_tokens)
    classes = np.asarray(classes, dtype=np.int64)
    B, n = slot_tokens.shape
    H, nh, hd = cfg.hidden_size, cfg.heads, cfg.head_dim
    if start + n > layout.input_len:
        raise ValueError(f"slots {start}..{start + n - 1} exceed layout length {layout.input_len}")
    if cache is not None and cache.length != start:
        raise ValueError(f"cache holds {cache.length} slots but start={start}")
    if classes.shape != (B,) or classes.min() < 0 or classes.max() > cfg.null_class:
        raise ValueError(f"classes must be {B} labels in [0, {cfg.null_class}]")
    drop_rng = rng if train else None

    parts = []
    if start == 0:
        parts.append(nx.embedding(params["class_emb"], classes).reshape(B, 1, H))
    ids = slot_tokens[:, 1:] if start == 0 else slot_tokens
    if ids.shape[1]:
        parts.append(embed_tokens(params, ids))
    x = parts[0] if len(parts) == 1 else nx.concat(parts, axis=1)
    x = nx.dropout(x, cfg.dropout, drop_rng)

    use_ada = cfg.adaln_condition != "none"
    if use_ada:
        cond_act = nx.silu(_condition(params, classes, layout, start, n))

    table = layout.rotation_table(cfg.rope_mode, hd).rows(start, start + n)
    cos, sin = table.cos, table.sin
    q_pos = np.arange(start, start + n)[:, None]
    k_pos = np.arange(0 if cache is not None else start, start + n)
    mask = k_pos[None, :] <= q_pos
    inv_sqrt = np.asarray(1.0 / math.sqrt(hd), dtype=params.dtype)

    def heads(t: Tensor) -> Tensor:
        return t.reshape(B, n, nh, hd).transpose(0, 2, 1, 3)

    for i in range(cfg.layers):
        p = f"layers.{i}."
        if use_ada:
            mod = cond_act @ params[p + "ada_w"] + params[p + "ada_b"]
            chunks = [mod[..., j * H : (j + 1) * H] for j in range(4)]

        hn = nx.rmsnorm(x, cfg.norm_eps)
        if probe is not None:
            probe(p + "attn_norm", hn.data)
        h = hn * params[p + "attn_norm"]
        if use_ada:
            h = _modulate(h, chunks[0], chunks[1])
        q = nx.rotate_pairs(heads(h @ params[p + "wq"]), cos, sin)
        k = nx.rotate_pairs(heads(h @ params[p + "wk"]), cos, sin)
        v = heads(h @ params[p + "wv"])
        if cache is not None:
            k_all, v_all = cache.extend(i, k.data, v.data)
            k, v = Tensor(k_all), Tensor(v_all)
        scores = (q @ k.transpose(0, 1, 3, 2)) * inv_sqrt
        att = nx.dropout(nx.softmax(scores, mask), cfg.attn_dropout, drop_rng)
        o = (att @ v).transpose(0, 2, 1, 3).reshape(B, n, H) @ params[p + "wo"]
        x = x + nx.dropout(o, cfg.dropout, drop_rng)

        hn = nx.rmsnorm(x, cfg.norm_eps)
        if probe is not None:
            probe(p + "ffn_norm", hn.data)
        h = hn * params[p + "ffn_norm"]
        if use_ada:
            h = _modulate(h, chunks[2], chunks[3])
        u = nx.swiglu(h @ params[p + "w_gate"], h @ params[p + "w_up"]) @ params[p + "w_down"]
        x = x + nx.dropout(u, cfg.dropout, drop_rng)

    if cache is not None:
        cache.length += n
    hn = nx.rmsnorm(x, cfg.norm_eps)
    if probe is not None:
        probe("final_norm", hn.data)
    logits = (hn * params["final_norm"]) @ params["head_w"] + params["head_b"]
    try:
        nx.check_finite(logits, "logits")
    except nx.NonFiniteError as e:
        bad = {k: int(np.size(t.data) - np.isfinite(t.data).sum()) for k, t in params.tensors.items()}
        bad = {k: v for k, v in bad.items() if v}
        raise nx.NonFiniteError(f"{e}; non-finite parameters: {bad or 'none'}") from None
    return logits


def nll_loss(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean next-token negative log-likelihood over all slots."""
    return nx.cross_entropy(logits, targets)


def sequence_io(grids: np.ndarray, layout: SequenceLayout) -> tuple[np.ndarray, np.ndarray]:
    """Slot inputs and targets for ``(B, h, w)`` grids under the layout's scan."""
    seq = layout.order.flatten(np.asarray(grids))
    inputs = np.concatenate([np.zeros_like(seq[:, :1]), seq[:, :-1]], axis=1)
    return inputs, seq


def drop_classes(classes: np.ndarray, rate: float, null: int, rng: np.random.Generator | None) -> np.ndarray:
    if rate <= 0 or rng is None:
        return classes
    return np.where(rng.random(classes.shape) < rate, null, classes)


def batch_loss(
    params: ModelParams,
    grids: np.ndarray,
    classes: np.ndarray,
    layout: SequenceLayout,
    *,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    inputs, targets = sequence_io(grids, layout)
    classes = np.asarray(classes, dtype=np.int64)
    if train:
        classes = drop_classes(classes, params.config.class_dropout, params.config.null_class, rng)
    logits = forward(params, inputs, classes, layout, train=train, rng=rng)
    return nll_loss(logits, targets)
