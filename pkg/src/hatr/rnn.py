"""GRU-style recurrent decoder: the speed-comparison baseline.

Matches the attention decoder's interfaces where it matters for fairness:
same embedding + positional code + holistic fusion, same prediction head
shape, and a multi-head 2D attention over the encoder grid queried once
per step by the recurrent state. The recurrence makes every step depend
on the full prefix, so the training pass is sequential by construction
and gradients flow through the unrolled chain.
"""

from __future__ import annotations

import numpy as np

from .autodiff import (
    Tensor,
    add,
    add_scalar,
    concat,
    constant,
    embedding,
    linear,
    mul,
    parameter,
    scale,
    sigmoid,
    tanh,
)
from .decoder import DecoderConfig, MultiHeadAttention, _sample_block_bias, positional_encoding_table
from .vocab import BOS, EMBED_ROWS


class GruBaselineDecoder:
    def __init__(self, config: DecoderConfig, rng: np.random.Generator):
        config.validate()
        self.config = config
        d = config.d
        half = d // 2
        self.embed = parameter(rng.normal(0.0, 0.5, (EMBED_ROWS, half)))
        self.pe = positional_encoding_table(config.max_len, half)
        self.attn = MultiHeadAttention(rng, d, config.n_heads, config.scale_mode)
        in_dim = 2 * d  # [fused input; attention context]
        std_in = np.sqrt(1.0 / in_dim)
        std_h = np.sqrt(1.0 / d)
        self.w = {}
        for gate in ("z", "r", "h"):
            self.w[f"W{gate}"] = parameter(rng.normal(0.0, std_in, (d, in_dim)))
            self.w[f"U{gate}"] = parameter(rng.normal(0.0, std_h, (d, d)))
            self.w[f"b{gate}"] = parameter(np.zeros(d))
        self.head_w = parameter(rng.normal(0.0, 1e-3, (config.num_classes, d)))
        self.head_b = parameter(np.zeros(config.num_classes))

    def _fuse(self, ids_t: np.ndarray, t: int, holistic: Tensor | None) -> Tensor:
        half = self.config.d // 2
        batch = ids_t.shape[0]
        emb = embedding(self.embed, ids_t)
        fused = add(emb, constant(np.tile(self.pe[t], (batch, 1))))
        if self.config.use_holistic and holistic is not None:
            return concat([fused, holistic], axis=1)
        return concat([fused, constant(np.zeros((batch, half)))], axis=1)

    def _cell(self, u: Tensor, h: Tensor) -> Tensor:
        w = self.w
        z = sigmoid(add(linear(u, w["Wz"], w["bz"]), linear(h, w["Uz"])))
        r = sigmoid(add(linear(u, w["Wr"], w["br"]), linear(h, w["Ur"])))
        cand = tanh(add(linear(u, w["Wh"], w["bh"]), linear(mul(r, h), w["Uh"])))
        keep = add_scalar(scale(z, -1.0), 1.0)  # 1 - z
        return add(mul(keep, h), mul(z, cand))

    def forward_teacher_forced(
        self, targets: np.ndarray, featmap: Tensor, holistic: Tensor | None
    ) -> Tensor:
        """targets [batch, T] -> logits [T*batch, classes], rows time-major.

        Sequential over T; each step queries the feature grid with the
        previous hidden state and feeds [fused; context] into the GRU cell."""
        batch, t_len = targets.shape
        if t_len > self.config.max_len:
            raise ValueError(f"sequence length {t_len} exceeds max_len {self.config.max_len}")
        d = self.config.d
        m = featmap.shape[1] * featmap.shape[2]
        keys = Tensor(
            featmap.data.reshape(batch * m, d), requires_grad=featmap.requires_grad
        )
        feat_bias = _sample_block_bias(batch, 1, m) if batch > 1 else None
        ids = np.empty_like(targets)
        ids[:, 0] = BOS
        ids[:, 1:] = targets[:, :-1]
        h = constant(np.zeros((batch, d)))
        step_logits = []
        for t in range(t_len):
            x_t = self._fuse(ids[:, t], t, holistic)
            ctx, _ = self.attn(h, keys, keys, feat_bias)
            u = concat([x_t, ctx], axis=1)
            h = self._cell(u, h)
            step_logits.append(linear(h, self.head_w, self.head_b))
        return concat(step_logits, axis=0)

    def named_params(self, prefix="gru"):
        yield f"{prefix}.embed", self.embed
        yield from self.attn.named_params(f"{prefix}.attn2d")
        for name in sorted(self.w):
            yield f"{prefix}.{name}", self.w[name]
        yield f"{prefix}.head.weight", self.head_w
        yield f"{prefix}.head.bias", self.head_b

    def param_count(self) -> int:
        return sum(t.size for _, t in self.named_params())
