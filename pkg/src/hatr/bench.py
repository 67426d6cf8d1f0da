"""Decoder speed benchmark: parallel attention decoder vs sequential GRU.

Times teacher-forced forward and backward passes of both decoders on
identical random encoder features, across sequence lengths and batch
sizes. Encoder time is excluded (the comparison is decoder-only); wall
times are reported as median/p10/p90 over R repetitions after warmup.
The point is the scaling property, not absolute milliseconds: the
attention decoder's cost per token is roughly flat in T while the
recurrent baseline pays a per-step sequential cost.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor, cross_entropy
from .decoder import Decoder, DecoderConfig
from .rnn import GruBaselineDecoder

DEFAULT_LENGTHS = (5, 10, 20, 40)
DEFAULT_BATCHES = (20,)
MIN_REPEATS = 20


@dataclass
class BenchRow:
    kind: str  # "attention" | "gru"
    seq_len: int
    batch: int
    phase: str  # "forward" | "backward"
    median_ms: float
    p10_ms: float
    p90_ms: float
    params: int


def _percentiles(times_ms: list[float]) -> tuple[float, float, float]:
    arr = np.asarray(times_ms)
    return (
        float(np.percentile(arr, 50)),
        float(np.percentile(arr, 10)),
        float(np.percentile(arr, 90)),
    )


def run_bench(
    lengths: tuple[int, ...] = DEFAULT_LENGTHS,
    batch_sizes: tuple[int, ...] = DEFAULT_BATCHES,
    repeats: int = MIN_REPEATS,
    decoder_config: DecoderConfig | None = None,
    grid: tuple[int, int] = (4, 8),
    seed: int = 0,
    warmup: int = 2,
) -> list[BenchRow]:
    """Measure both decoders over the (length, batch) grid.

    Also asserts computation determinism: within a configuration, repeated
    forward passes must produce bit-identical logits."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    cfg = decoder_config or DecoderConfig.desk(max_len=max(lengths) + 1)
    if cfg.max_len <= max(lengths):
        raise ValueError(f"decoder max_len {cfg.max_len} too small for T={max(lengths)}")
    gh, gw = grid
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(3,))
    attn_ss, gru_ss, data_ss = ss.spawn(3)
    attn_dec = Decoder(cfg, np.random.default_rng(attn_ss))
    gru_dec = GruBaselineDecoder(cfg, np.random.default_rng(gru_ss))
    attn_params = sum(t.size for _, t in attn_dec.named_params())
    gru_params = gru_dec.param_count()
    data_rng = np.random.default_rng(data_ss)

    rows: list[BenchRow] = []
    for batch in batch_sizes:
        for t_len in lengths:
            featmap = Tensor(data_rng.normal(size=(batch, gh, gw, cfg.d)))
            holistic = Tensor(data_rng.normal(size=(batch, cfg.d // 2)))
            targets = data_rng.integers(0, cfg.num_classes, size=(batch, t_len))

            for kind, dec, params in (
                ("attention", attn_dec, attn_params),
                ("gru", gru_dec, gru_params),
            ):
                fwd_ms, bwd_ms = [], []
                reference = None
                for rep in range(warmup + repeats):
                    for _, p in dec.named_params():
                        p.grad = None
                    with Tape() as tape:
                        t0 = time.perf_counter()
                        if kind == "attention":
                            logits, _ = dec.forward_teacher_forced(targets, featmap, holistic)
                            flat_targets = targets.reshape(-1)
                        else:
                            logits = dec.forward_teacher_forced(targets, featmap, holistic)
                            flat_targets = targets.T.reshape(-1)  # time-major rows
                        t1 = time.perf_counter()
                        loss = cross_entropy(logits, flat_targets)
                    t2 = time.perf_counter()
                    tape.backward(loss)
                    t3 = time.perf_counter()
                    if reference is None:
                        reference = logits.data.copy()
                    elif not np.array_equal(reference, logits.data):
                        raise AssertionError(f"{kind} logits not deterministic across reps")
                    if rep >= warmup:
                        fwd_ms.append((t1 - t0) * 1e3)
                        bwd_ms.append((t3 - t2) * 1e3)
                for phase, times in (("forward", fwd_ms), ("backward", bwd_ms)):
                    med, p10, p90 = _percentiles(times)
                    rows.append(BenchRow(kind, t_len, batch, phase, med, p10, p90, params))
    return rows


def speedups(rows: list[BenchRow], phase: str = "backward") -> dict[tuple[int, int], float]:
    """(batch, seq_len) -> median GRU time / median attention time."""
    med = {(r.kind, r.batch, r.seq_len): r.median_ms for r in rows if r.phase == phase}
    out = {}
    for (kind, batch, t_len), value in med.items():
        if kind != "gru":
            continue
        attn = med.get(("attention", batch, t_len))
        if attn:
            out[(batch, t_len)] = value / attn
    return out


def monotonic_violations(ratio_by_len: dict[int, float]) -> int:
    """Count adjacent pairs where the speedup decreases as T grows."""
    lens = sorted(ratio_by_len)
    return sum(
        1 for a, b in zip(lens, lens[1:]) if ratio_by_len[b] < ratio_by_len[a]
    )


def write_csv(rows: list[BenchRow], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["kind", "seq_len", "batch", "phase", "median_ms", "p10_ms", "p90_ms", "params"]
        )
        for r in rows:
            writer.writerow(
                [
                    r.kind,
                    r.seq_len,
                    r.batch,
                    r.phase,
                    f"{r.median_ms:.3f}",
                    f"{r.p10_ms:.3f}",
                    f"{r.p90_ms:.3f}",
                    r.params,
                ]
            )
