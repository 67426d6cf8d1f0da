"""Binary checkpoint format.

Layout: magic ``HATR``, u32 version, length-prefixed JSON meta block
(configs, direction, seed, step, rng state), then u32 record count and
per record: u32 name length, UTF-8 name, u8 ndim, u32 dims, raw float64
little-endian data. Records cover parameters (``param.``), batchnorm
running buffers (``buffer.``) and optimizer accumulators (``opt.``), and
are sorted by name, making save -> load -> save byte-identical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .model import Recognizer
from .trainer import TrainConfig, Trainer

MAGIC = b"HATR"
VERSION = 1


def _collect_records(trainer: Trainer) -> dict[str, np.ndarray]:
    model = trainer.model
    records: dict[str, np.ndarray] = {}
    for name, p in model.named_params():
        records[f"param.{name}"] = p.data
    for name, buf in model.named_buffers():
        records[f"buffer.{name}"] = buf
    for name, state in trainer.opt_state.items():
        records[f"opt.Eg2.{name}"] = state["Eg2"]
        records[f"opt.Edx2.{name}"] = state["Edx2"]
    return records


def save_checkpoint(path: str, trainer: Trainer) -> None:
    model = trainer.model
    meta = {
        "encoder": asdict(model.encoder_config),
        "decoder": asdict(model.decoder_config),
        "train": asdict(trainer.config),
        "direction": model.direction,
        "seed": model.seed,
        "step": trainer.step,
        "rng": trainer.order_rng.bit_generator.state,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    records = _collect_records(trainer)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(meta_bytes)))
        f.write(meta_bytes)
        f.write(struct.pack("<I", len(records)))
        for name in sorted(records):
            arr = records[name]
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, path: str):
        with open(path, "rb") as f:
            self.buf = f.read()
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ValueError(f"{self.path}: truncated checkpoint (wanted {n} more bytes)")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]


def load_checkpoint(path: str) -> Trainer:
    """Rebuild a trainer (model, optimizer state, rng, step) from a file."""
    r = _Reader(path)
    magic = r.take(4)
    if magic != MAGIC:
        raise ValueError(f"{path}: expected magic {MAGIC!r}, found {magic!r}")
    version = r.u32()
    if version != VERSION:
        raise ValueError(f"{path}: expected version {VERSION}, found {version}")
    meta = json.loads(r.take(r.u32()).decode("utf-8"))

    enc = meta["encoder"]
    enc["channel_widths"] = tuple(enc["channel_widths"])
    enc["blocks_per_stage"] = tuple(enc["blocks_per_stage"])
    model = Recognizer(
        EncoderConfig(**enc),
        DecoderConfig(**meta["decoder"]),
        direction=meta["direction"],
        seed=meta["seed"],
    )
    trainer = Trainer(model, TrainConfig(**meta["train"]))
    trainer.step = meta["step"]
    trainer.order_rng.bit_generator.state = meta["rng"]

    count = r.u32()
    records: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        ndim = r.u8()
        shape = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(shape).copy()
        records[name] = data

    def pop(name: str) -> np.ndarray:
        if name not in records:
            raise ValueError(f"{path}: missing record {name!r}")
        return records.pop(name)

    for name, p in model.named_params():
        arr = pop(f"param.{name}")
        if arr.shape != p.data.shape:
            raise ValueError(f"{path}: shape mismatch for {name}: {arr.shape} vs {p.data.shape}")
        p.data = arr
    for name, buf in model.named_buffers():
        buf[...] = pop(f"buffer.{name}")
    for name, state in trainer.opt_state.items():
        state["Eg2"] = pop(f"opt.Eg2.{name}")
        state["Edx2"] = pop(f"opt.Edx2.{name}")
    if records:
        raise ValueError(f"{path}: unexpected extra records {sorted(records)[:3]}")
    return trainer
