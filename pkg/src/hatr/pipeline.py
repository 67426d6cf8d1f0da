"""End-to-end inference: preprocessing, beam search, selection, attention export.

Scoring convention: hypotheses are pruned within a beam by raw accumulated
log-probability (equal-length comparisons), while finished hypotheses and
cross-candidate/direction selection rank by length-normalized score
(total logprob / emitted tokens incl. EOS), so shorter outputs get no free
advantage.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, no_grad
from .bidir import reverse_labels
from .decoder import Decoder
from .imgops import bilinear_resize
from .model import Recognizer
from .pgm import write_pgm
from .vocab import EOS, VOCAB


@dataclass
class BeamConfig:
    k: int = 5
    max_len: int = 32

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError(f"beam width {self.k} must be >= 1")


@dataclass
class Hypothesis:
    tokens: list[int] = field(default_factory=list)
    logprob_sum: float = 0.0
    finished: bool = False
    records: list[np.ndarray] = field(default_factory=list)  # per step [heads, M]

    @property
    def normalized_score(self) -> float:
        return self.logprob_sum / max(1, len(self.tokens))


@dataclass
class RecognitionResult:
    text: str
    score: float
    candidate_index: int
    direction: str
    tokens: list[int]
    records: list[np.ndarray]
    n_candidates: int = 1


def preprocess(image: np.ndarray, out_h: int, out_w: int) -> list[np.ndarray]:
    """Resize to the encoder input; tall images (h > 2w) additionally yield
    +90 and -90 degree rotations (rotation happens on the raw array, losslessly,
    before resizing). Returns float arrays in [0, 255]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"degenerate image shape {img.shape}")
    h, w = img.shape
    candidates = [img]
    if h > 2 * w:
        candidates.append(np.rot90(img, 1))
        candidates.append(np.rot90(img, -1))
    return [bilinear_resize(c, out_h, out_w) for c in candidates]


def beam_search(
    featmap: Tensor,
    holistic: Tensor | None,
    decoder: Decoder,
    config: BeamConfig,
) -> tuple[Hypothesis, list[Hypothesis]]:
    """Breadth-limited search over token sequences.

    Expands every live hypothesis over all classes each step, keeps the
    top-k by accumulated logprob, and moves EOS-terminated ones into the
    finished pool. Hypotheses hitting max_len are force-finished. Returns
    the best finished hypothesis by normalized score, plus the rest of the
    pool sorted the same way."""
    config.validate()
    # decode_step with a prefix of length L-1 yields token L, so L may reach
    # the decoder's max_len exactly
    max_len = min(config.max_len, decoder.config.max_len)
    live = [Hypothesis()]
    finished: list[Hypothesis] = []
    with no_grad():
        for _ in range(max_len):
            candidates = []
            for hyp in live:
                probs, record = decoder.decode_step(hyp.tokens, featmap, holistic)
                logp = np.log(probs)
                top = np.argsort(logp)[::-1][: config.k]
                for c in top:
                    candidates.append((hyp.logprob_sum + float(logp[c]), hyp, int(c), record))
            candidates.sort(key=lambda item: -item[0])
            live = []
            for total, hyp, c, record in candidates[: config.k]:
                new = Hypothesis(hyp.tokens + [c], total, c == EOS, hyp.records + [record])
                if new.finished:
                    finished.append(new)
                else:
                    live.append(new)
            if not live:
                break
        for hyp in live:  # max_len reached without EOS
            hyp.finished = True
            finished.append(hyp)
    finished.sort(key=lambda h: -h.normalized_score)
    return finished[0], finished[1:]


def recognize(
    image: np.ndarray,
    model: Recognizer,
    beam: BeamConfig | None = None,
    direction: str | None = None,
) -> RecognitionResult:
    """Run the full pipeline on one grayscale uint8 image.

    Beam-searches every preprocessing candidate with every decoder the
    direction mode provides and returns the global argmax by normalized
    score. Pure function of (image, parameters, config)."""
    beam = beam or BeamConfig()
    direction = direction or model.direction
    cfg = model.encoder_config
    candidates = preprocess(image, cfg.input_height, cfg.input_width)

    if direction == "bidirectional":
        directions = [d for d in ("normal", "reversed") if d in model.decoders]
    else:
        if direction not in model.decoders:
            raise ValueError(f"model has no {direction!r} decoder")
        directions = [direction]

    best: RecognitionResult | None = None
    for ci, cand in enumerate(candidates):
        featmap, holistic = model.encode_images(cand[None], training=False)
        for dirname in directions:
            hyp, _ = beam_search(featmap, holistic, model.decoders[dirname], beam)
            tokens = hyp.tokens
            if dirname == "reversed":
                tokens = reverse_labels(tokens)
            result = RecognitionResult(
                text=VOCAB.decode(tokens),
                score=hyp.normalized_score,
                candidate_index=ci,
                direction=dirname,
                tokens=tokens,
                records=hyp.records,
                n_candidates=len(candidates),
            )
            if best is None or result.score > best.score:
                best = result
    return best


def export_attention(
    records: list[np.ndarray],
    image_shape: tuple[int, int],
    grid_shape: tuple[int, int],
    stem: str | os.PathLike,
) -> list[str]:
    """Write one heatmap per decoding step plus an aggregate map.

    Head-averaged weights are reshaped to the encoder grid, bilinearly
    upsampled to the image size and scaled to 8-bit grayscale PGM files
    named <stem>_step<t>.pgm and <stem>_agg.pgm."""
    if not records:
        raise ValueError("no attention records to export")
    h, w = image_shape
    gh, gw = grid_shape
    stem = os.fspath(stem)
    parent = os.path.dirname(stem)
    if parent:
        os.makedirs(parent, exist_ok=True)
    paths = []
    total = np.zeros((gh, gw))
    for t, rec in enumerate(records):
        grid = rec.mean(axis=0).reshape(gh, gw)
        total += grid
        path = f"{stem}_step{t}.pgm"
        write_pgm(path, _to_heatmap(grid, h, w))
        paths.append(path)
    total /= len(records)
    path = f"{stem}_agg.pgm"
    write_pgm(path, _to_heatmap(total, h, w))
    paths.append(path)
    return paths


def _to_heatmap(grid: np.ndarray, h: int, w: int) -> np.ndarray:
    up = bilinear_resize(grid, h, w)
    peak = up.max()
    if peak > 0:
        up = up / peak
    return np.rint(up * 255.0).astype(np.uint8)
