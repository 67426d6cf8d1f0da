"""Non-recurrent attention decoder.

Each input position fuses the embedding of the previous character (plus a
sinusoidal position code) with the image's holistic vector; a stack of
blocks applies masked self-attention, 2D attention over the flattened
encoder grid, and a position-wise feed-forward net, each wrapped in
residual-add + layernorm. Training runs all positions in one parallel
pass under a causal mask; stepwise decoding reuses the exact same path on
a growing prefix (no key/value caching, recompute per step).

Batching note: a whole batch is processed as one big row matrix
[batch * T, d] with block-diagonal additive masks, so key columns of one
sample are unreachable from queries of another. Masked logits get -1e30,
which float64 absorbs exactly, keeping causality bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autodiff import (
    ConfigError,
    ShapeError,
    Tensor,
    add,
    concat,
    constant,
    embedding,
    linear,
    matmul,
    layernorm,
    no_grad,
    parameter,
    relu,
    repeat_rows,
    reshape,
    scale,
    softmax,
    transpose2d,
)
from .vocab import BOS, EMBED_ROWS, NUM_CLASSES

MASK_BIAS = -1e30


@dataclass
class DecoderConfig:
    n_blocks: int = 1
    n_heads: int = 4
    d: int = 64
    d_ff: int = 128
    max_len: int = 32
    use_self_attention: bool = True
    use_holistic: bool = True
    scale_mode: str = "per_head"  # "model" replicates the printed 1/sqrt(d) letterally
    num_classes: int = NUM_CLASSES

    @classmethod
    def desk(cls, **overrides) -> "DecoderConfig":
        return cls(**overrides)

    @classmethod
    def paper(cls, **overrides) -> "DecoderConfig":
        base = dict(n_blocks=1, n_heads=16, d=1024, d_ff=2048)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def preset(cls, name: str, **overrides) -> "DecoderConfig":
        if name == "desk":
            return cls.desk(**overrides)
        if name == "paper":
            return cls.paper(**overrides)
        raise ConfigError(f"unknown decoder preset {name!r}")

    def validate(self) -> None:
        if self.d % 2:
            raise ConfigError(f"model width d={self.d} must be even (embedding is d/2)")
        if self.d % self.n_heads:
            raise ConfigError(f"d={self.d} not divisible by {self.n_heads} heads")
        if self.scale_mode not in ("per_head", "model"):
            raise ConfigError(f"unknown attention scale mode {self.scale_mode!r}")
        if self.max_len < 1:
            raise ConfigError("max_len must be positive")


def positional_encoding_table(max_len: int, dim: int) -> np.ndarray:
    """Sinusoidal code table [max_len, dim]: even dims sin(p / 10000^(i/dim)),
    odd dims cos with the preceding even exponent."""
    table = np.empty((max_len, dim))
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    i = np.arange(dim, dtype=np.float64)
    even = i % 2 == 0
    exponent = np.where(even, i, i - 1) / dim
    angle = pos / np.power(10000.0, exponent)[None, :]
    table[:, even] = np.sin(angle[:, even])
    table[:, ~even] = np.cos(angle[:, ~even])
    return table


def positional_encoding(p: int, dim: int, max_len: int = 10_000) -> np.ndarray:
    """One row of the code table; p must lie in [0, max_len)."""
    if not 0 <= p < max_len:
        raise ShapeError(f"position {p} outside [0, {max_len})")
    return positional_encoding_table(p + 1, dim)[p]


@lru_cache(maxsize=64)
def _causal_block_bias(batch: int, t: int) -> np.ndarray:
    """[batch*t, batch*t] additive mask: within-sample causal, cross-sample blocked."""
    bias = np.full((batch * t, batch * t), MASK_BIAS)
    causal = np.triu(np.full((t, t), MASK_BIAS), k=1)
    for b in range(batch):
        bias[b * t : (b + 1) * t, b * t : (b + 1) * t] = causal
    return bias


@lru_cache(maxsize=64)
def _sample_block_bias(batch: int, t: int, m: int) -> np.ndarray:
    """[batch*t, batch*m] additive mask routing queries to their own feature map."""
    bias = np.full((batch * t, batch * m), MASK_BIAS)
    for b in range(batch):
        bias[b * t : (b + 1) * t, b * m : (b + 1) * m] = 0.0
    return bias


class MultiHeadAttention:
    """Scaled dot-product attention with per-head projections (rows are positions)."""

    def __init__(self, rng, d: int, n_heads: int, scale_mode: str):
        self.n_heads = n_heads
        self.d_head = d // n_heads
        self.scale = 1.0 / np.sqrt(self.d_head if scale_mode == "per_head" else d)
        std = np.sqrt(1.0 / d)
        self.w_q = [parameter(rng.normal(0.0, std, (self.d_head, d))) for _ in range(n_heads)]
        self.w_k = [parameter(rng.normal(0.0, std, (self.d_head, d))) for _ in range(n_heads)]
        self.w_v = [parameter(rng.normal(0.0, std, (self.d_head, d))) for _ in range(n_heads)]
        self.w_o = parameter(rng.normal(0.0, std, (d, d)))

    def __call__(
        self,
        queries: Tensor,
        keys: Tensor,
        values: Tensor,
        bias: np.ndarray | None = None,
    ) -> tuple[Tensor, np.ndarray]:
        """queries [Mq, d], keys/values [Mk, d] -> ([Mq, d], weights [H, Mq, Mk])."""
        if queries.shape[1] != keys.shape[1] or keys.shape != values.shape:
            raise ShapeError(
                f"attention operand widths differ: q {queries.shape}, k {keys.shape}, "
                f"v {values.shape}"
            )
        bias_t = constant(bias) if bias is not None else None
        contexts = []
        weights = np.empty((self.n_heads, queries.shape[0], keys.shape[0]))
        for h in range(self.n_heads):
            q = linear(queries, self.w_q[h])
            k = linear(keys, self.w_k[h])
            v = linear(values, self.w_v[h])
            scores = scale(matmul(q, transpose2d(k)), self.scale)
            if bias_t is not None:
                scores = add(scores, bias_t)
            alpha = softmax(scores, axis=-1)
            weights[h] = alpha.data
            contexts.append(matmul(alpha, v))
        out = linear(concat(contexts, axis=1), self.w_o)
        return out, weights

    def named_params(self, prefix):
        for h in range(self.n_heads):
            yield f"{prefix}.q{h}", self.w_q[h]
            yield f"{prefix}.k{h}", self.w_k[h]
            yield f"{prefix}.v{h}", self.w_v[h]
        yield f"{prefix}.o", self.w_o


class LayerNorm:
    def __init__(self, dim: int):
        self.gain = parameter(np.ones(dim))
        self.bias = parameter(np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        return layernorm(x, self.gain, self.bias)

    def named_params(self, prefix):
        yield f"{prefix}.gain", self.gain
        yield f"{prefix}.bias", self.bias


class DecoderBlock:
    """(optional masked self-attention) -> 2D attention -> FFN, each residual+LN."""

    def __init__(self, rng, config: DecoderConfig):
        d, dff = config.d, config.d_ff
        self.use_self_attention = config.use_self_attention
        if self.use_self_attention:
            self.self_attn = MultiHeadAttention(rng, d, config.n_heads, config.scale_mode)
            self.ln1 = LayerNorm(d)
        self.attn_2d = MultiHeadAttention(rng, d, config.n_heads, config.scale_mode)
        self.ln2 = LayerNorm(d)
        self.ffn_w1 = parameter(rng.normal(0.0, np.sqrt(2.0 / d), (dff, d)))
        self.ffn_b1 = parameter(np.zeros(dff))
        self.ffn_w2 = parameter(rng.normal(0.0, np.sqrt(1.0 / dff), (d, dff)))
        self.ffn_b2 = parameter(np.zeros(d))
        self.ln3 = LayerNorm(d)

    def ffn(self, x: Tensor) -> Tensor:
        return linear(relu(linear(x, self.ffn_w1, self.ffn_b1)), self.ffn_w2, self.ffn_b2)

    def __call__(
        self,
        x: Tensor,
        feat_keys: Tensor,
        self_bias: np.ndarray | None,
        feat_bias: np.ndarray | None,
    ) -> tuple[Tensor, np.ndarray]:
        if self.use_self_attention:
            attn, _ = self.self_attn(x, x, x, self_bias)
            x = self.ln1(add(x, attn))
        ctx, weights_2d = self.attn_2d(x, feat_keys, feat_keys, feat_bias)
        x = self.ln2(add(x, ctx))
        x = self.ln3(add(x, self.ffn(x)))
        return x, weights_2d

    def named_params(self, prefix):
        if self.use_self_attention:
            yield from self.self_attn.named_params(f"{prefix}.self")
            yield from self.ln1.named_params(f"{prefix}.ln1")
        yield from self.attn_2d.named_params(f"{prefix}.attn2d")
        yield from self.ln2.named_params(f"{prefix}.ln2")
        yield f"{prefix}.ffn.w1", self.ffn_w1
        yield f"{prefix}.ffn.b1", self.ffn_b1
        yield f"{prefix}.ffn.w2", self.ffn_w2
        yield f"{prefix}.ffn.b2", self.ffn_b2
        yield from self.ln3.named_params(f"{prefix}.ln3")


class Decoder:
    def __init__(self, config: DecoderConfig, rng: np.random.Generator):
        config.validate()
        self.config = config
        half = config.d // 2
        self.embed = parameter(rng.normal(0.0, 0.5, (EMBED_ROWS, half)))
        self.pe = positional_encoding_table(config.max_len, half)
        self.blocks = [DecoderBlock(rng, config) for _ in range(config.n_blocks)]
        # near-zero head so an untrained model predicts ~uniform classes
        self.head_w = parameter(rng.normal(0.0, 1e-3, (config.num_classes, config.d)))
        self.head_b = parameter(np.zeros(config.num_classes))

    # -- input fusion -------------------------------------------------------

    def fuse_inputs(self, ids: np.ndarray, holistic: Tensor | None) -> Tensor:
        """ids [batch, T] of previous-token indices -> fused rows [batch*T, d].

        Row (b, t) is embedding(ids[b, t]) + PE(t), concatenated with the
        sample's holistic vector (zeros when the switch is off)."""
        batch, t = ids.shape
        if t > self.config.max_len:
            raise ShapeError(f"sequence length {t} exceeds max_len {self.config.max_len}")
        half = self.config.d // 2
        emb = embedding(self.embed, ids.reshape(-1))
        pe_rows = constant(np.tile(self.pe[:t], (batch, 1)))
        fused = add(emb, pe_rows)
        if self.config.use_holistic and holistic is not None:
            if holistic.shape != (batch, half):
                raise ShapeError(
                    f"holistic shape {holistic.shape} must be ({batch}, {half}) = (batch, d/2)"
                )
            hol = repeat_rows(holistic, t)
        else:
            hol = constant(np.zeros((batch * t, half)))
        return concat([fused, hol], axis=1)

    def fuse_input(self, prev_token: int, p: int, holistic: Tensor | None) -> Tensor:
        """Single-position fusion: the [1, d] input row for (prev_token, p)."""
        if not 0 <= prev_token < EMBED_ROWS:
            raise ShapeError(f"token id {prev_token} out of embedding range")
        if not 0 <= p < self.config.max_len:
            raise ShapeError(f"position {p} outside [0, {self.config.max_len})")
        half = self.config.d // 2
        fused = add(embedding(self.embed, [prev_token]), constant(self.pe[p : p + 1]))
        if self.config.use_holistic and holistic is not None:
            hol = holistic if holistic.data.ndim == 2 else Tensor(holistic.data[None])
            if hol.shape != (1, half):
                raise ShapeError(f"holistic shape {hol.shape} must be (1, {half})")
            return concat([fused, repeat_rows(hol, 1)], axis=1)
        return concat([fused, constant(np.zeros((1, half)))], axis=1)

    # -- full passes ---------------------------------------------------------

    def forward_rows(
        self, ids: np.ndarray, featmap: Tensor, holistic: Tensor | None
    ) -> tuple[Tensor, list[np.ndarray]]:
        """ids [batch, T] previous tokens, featmap [batch, h', w', d] ->
        (logits [batch*T, classes], per-block 2D-attention weights)."""
        batch, t = ids.shape
        if featmap.data.ndim != 4 or featmap.shape[0] != batch or featmap.shape[3] != self.config.d:
            raise ShapeError(
                f"featmap {featmap.shape} must be [batch={batch}, h', w', d={self.config.d}]"
            )
        m = featmap.shape[1] * featmap.shape[2]
        x = self.fuse_inputs(ids, holistic)
        # flatten the grid through the graph so gradients reach the encoder
        keys = reshape(featmap, (batch * m, self.config.d))
        self_bias = _causal_block_bias(batch, t) if self.config.use_self_attention else None
        feat_bias = _sample_block_bias(batch, t, m) if batch > 1 else None
        records = []
        for block in self.blocks:
            x, weights = block(x, keys, self_bias, feat_bias)
            records.append(weights)
        logits = linear(x, self.head_w, self.head_b)
        return logits, records

    def forward_teacher_forced(
        self, targets: np.ndarray, featmap: Tensor, holistic: Tensor | None
    ) -> tuple[Tensor, list[np.ndarray]]:
        """targets [batch, T] (class ids, EOS-terminated, PAD-filled) ->
        logits for every position in one parallel pass."""
        batch, t = targets.shape
        ids = np.empty_like(targets)
        ids[:, 0] = BOS
        ids[:, 1:] = targets[:, :-1]
        return self.forward_rows(ids, featmap, holistic)

    def decode_step(
        self, prefix: list[int], featmap: Tensor, holistic: Tensor | None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Next-token distribution given an emitted prefix (single sample).

        Returns (probabilities [classes], attention record [heads, M]) where
        the record holds the last block's 2D-attention weights at the new
        position. Deterministic; runs without recording gradients."""
        if len(prefix) >= self.config.max_len:
            raise ShapeError(f"prefix length {len(prefix)} exceeds max_len - 1")
        ids = np.array([[BOS] + list(prefix)])
        fm = featmap if featmap.data.ndim == 4 else Tensor(featmap.data[None])
        hol = None
        if holistic is not None:
            hol = holistic if holistic.data.ndim == 2 else Tensor(holistic.data[None])
        with no_grad():
            logits, records = self.forward_rows(ids, fm, hol)
            probs = softmax(logits, axis=-1).data[-1]
        return probs, records[-1][:, -1, :]

    def named_params(self, prefix="decoder"):
        yield f"{prefix}.embed", self.embed
        for i, block in enumerate(self.blocks):
            yield from block.named_params(f"{prefix}.block{i}")
        yield f"{prefix}.head.weight", self.head_w
        yield f"{prefix}.head.bias", self.head_b
