"""Teacher-forced training with ADADELTA, evaluation, and metric logging.

A step encodes the whole batch once, runs one decoder per direction (two
in bidirectional mode, losses summed with equal weight), masks PAD
positions out of the cross-entropy, backpropagates, and applies the
optimizer update. All batch ordering flows from the config seed, so a run
is bit-reproducible and can resume from a checkpoint exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor, add, cross_entropy
from .bidir import reverse_labels, validate_direction
from .model import Recognizer
from .pipeline import BeamConfig, recognize
from .synth import Sample
from .vocab import EOS, PAD, VOCAB


@dataclass
class TrainConfig:
    batch_size: int = 16
    max_steps: int = 2000
    epochs: int = 0  # > 0 derives the step budget from dataset passes instead
    optimizer: str = "adadelta"
    rho: float = 0.9
    eps: float = 1e-6
    lr: float = 0.1  # sgd only
    direction: str = "bidirectional"
    eval_every: int = 100
    seed: int = 0
    # early stop: finish once greedy train-set accuracy reaches this (0 disables)
    target_train_accuracy: float = 0.0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in ("adadelta", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        validate_direction(self.direction)


def adadelta_update(
    param: Tensor, grad: np.ndarray, state: dict[str, np.ndarray], rho: float, eps: float
) -> None:
    """E[g2] <- rho E[g2] + (1-rho) g2;  dx = -sqrt(E[dx2]+eps)/sqrt(E[g2]+eps) * g;
    E[dx2] <- rho E[dx2] + (1-rho) dx2;  param += dx."""
    eg2, edx2 = state["Eg2"], state["Edx2"]
    eg2 *= rho
    eg2 += (1.0 - rho) * grad * grad
    dx = -np.sqrt(edx2 + eps) / np.sqrt(eg2 + eps) * grad
    edx2 *= rho
    edx2 += (1.0 - rho) * dx * dx
    param.data += dx


def levenshtein(a: str, b: str) -> int:
    """Classic dynamic-programming edit distance."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def pad_targets(labels: list[str], reverse: bool = False) -> np.ndarray:
    """Encode labels to [batch, T] class ids, EOS-terminated and PAD-filled."""
    seqs = []
    for label in labels:
        ids = VOCAB.encode(label)
        if reverse:
            ids = reverse_labels(ids)
        seqs.append(ids + [EOS])
    t = max(len(s) for s in seqs)
    out = np.full((len(seqs), t), PAD, dtype=np.intp)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
    return out


class Trainer:
    def __init__(self, model: Recognizer, config: TrainConfig):
        config.validate()
        if config.direction != model.direction:
            raise ValueError(
                f"train direction {config.direction!r} != model direction {model.direction!r}"
            )
        self.model = model
        self.config = config
        self.step = 0
        self.opt_state: dict[str, dict[str, np.ndarray]] = {}
        if config.optimizer == "adadelta":
            for name, p in model.named_params():
                self.opt_state[name] = {
                    "Eg2": np.zeros_like(p.data),
                    "Edx2": np.zeros_like(p.data),
                }
        self.order_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=config.seed, spawn_key=(2,))
        )

    # -- single optimization step -------------------------------------------

    def train_step(self, batch: list[Sample]) -> float:
        if not batch:
            raise ValueError("empty batch")
        max_label = self.model.decoder_config.max_len - 1  # room for EOS
        for sample in batch:
            if len(sample.label) > max_label:
                raise ValueError(
                    f"label {sample.label!r} has {len(sample.label)} chars, "
                    f"limit is {max_label}"
                )
        images = np.stack([s.image for s in batch])
        labels = [s.label for s in batch]
        with Tape() as tape:
            featmap, holistic = self.model.encode_images(images, training=True)
            loss = None
            for direction, decoder in sorted(self.model.decoders.items()):
                targets = pad_targets(labels, reverse=(direction == "reversed"))
                logits, _ = decoder.forward_teacher_forced(targets, featmap, holistic)
                part = cross_entropy(logits, targets.reshape(-1), ignore_index=PAD)
                loss = part if loss is None else add(loss, part)
        tape.backward(loss)
        self._apply_updates()
        self.step += 1
        return loss.item()

    def _apply_updates(self) -> None:
        cfg = self.config
        for name, p in self.model.named_params():
            if p.grad is None:
                continue
            if cfg.optimizer == "adadelta":
                adadelta_update(p, p.grad, self.opt_state[name], cfg.rho, cfg.eps)
            else:
                p.data -= cfg.lr * p.grad
            p.grad = None

    # -- full loop ------------------------------------------------------------

    def train(self, dataset: list[Sample], metrics_path: str | None = None) -> list[dict]:
        """Run the step budget over shuffled batches; returns the metric log."""
        cfg = self.config
        n = len(dataset)
        if n == 0:
            raise ValueError("empty dataset")
        budget = cfg.max_steps
        if cfg.epochs > 0:
            budget = cfg.epochs * ((n + cfg.batch_size - 1) // cfg.batch_size)
        log: list[dict] = []
        t0 = time.time()
        order: list[int] = []
        mf = open(metrics_path, "w", encoding="utf-8") if metrics_path else None
        try:
            while self.step < budget:
                if not order:
                    order = list(self.order_rng.permutation(n))
                take, order = order[: cfg.batch_size], order[cfg.batch_size :]
                loss = self.train_step([dataset[i] for i in take])
                if cfg.eval_every and self.step % cfg.eval_every == 0:
                    metrics = evaluate(dataset, self.model, BeamConfig(k=1))
                    record = {
                        "step": self.step,
                        "loss": loss,
                        "accuracy": metrics["sequence_accuracy"],
                        "edit_distance": metrics["mean_norm_edit_distance"],
                        "wall_time": time.time() - t0,
                    }
                    log.append(record)
                    if mf:
                        mf.write(json.dumps(record, sort_keys=True) + "\n")
                        mf.flush()
                    if (
                        cfg.target_train_accuracy
                        and metrics["sequence_accuracy"] >= cfg.target_train_accuracy
                    ):
                        break
        finally:
            if mf:
                mf.close()
        return log


def evaluate(
    dataset: list[Sample], model: Recognizer, beam: BeamConfig | None = None
) -> dict[str, float]:
    """Sequence accuracy and mean normalized edit distance over a dataset."""
    if not dataset:
        raise ValueError("cannot evaluate on an empty dataset")
    beam = beam or BeamConfig()
    exact = 0
    dist = 0.0
    for sample in dataset:
        result = recognize(sample.image, model, beam)
        if result.text == sample.label:
            exact += 1
        denom = max(len(sample.label), len(result.text), 1)
        dist += levenshtein(result.text, sample.label) / denom
    n = len(dataset)
    return {
        "sequence_accuracy": exact / n,
        "mean_norm_edit_distance": dist / n,
        "n": float(n),
    }
