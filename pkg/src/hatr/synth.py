"""Deterministic synthetic word-image generator and dataset file I/O.

Renders words from the embedded 5x7 font onto a float canvas, applies one
of four distortion modes (none / rotate / perspective / arc), then blur,
noise and a resize to the encoder input size. Every sample is drawn from
its own rng stream split from the master seed, so generation is both
order-independent and byte-reproducible.

Dataset layout on disk: ``images/*.pgm`` plus ``labels.tsv`` (relative
path TAB label, UTF-8, LF).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import imgops
from .font5x7 import GLYPH_HEIGHT, GLYPH_WIDTH, glyph
from .pgm import read_pgm, write_pgm
from .vocab import VOCAB

MODES = ("none", "rotate", "perspective", "arc", "mixed")

# Common words for natural-ish labels; random strings cover the rest of the
# 94 classes (punctuation in particular).
WORDS = (
    "the and for are but not you all any can had her was one our out day get "
    "has him his how man new now old see two way who boy did its let put say "
    "she too use that with have this will your from they know want been good "
    "much some time very when come here just like long make many over such "
    "take than them well were House World Again Place Right Small Sound Work "
    "Year Down Word What Said Each Which Their If Up Other About Many Then "
    "These So Some Would Make Like Him Into Time Has Look More Write Go See "
    "Number No Could People My Than First Water Been Call Who Oil Its Now "
    "Find Long Day Did Get Come Made May Part STOP EXIT OPEN SHOP SALE Cafe "
    "Hotel Pizza Motel Bank Park Taxi Bus Rail Gate Door Book Road Street"
).split()


@dataclass
class SynthSpec:
    """Everything that determines a dataset, including its randomness."""

    seed: int = 0
    min_len: int = 1
    max_len: int = 10
    mode: str = "none"
    rotation_deg: float = 35.0  # rotate mode: angle drawn uniform in +-rotation_deg
    arc_sweep_deg: float = 60.0  # arc mode: total sweep drawn uniform in +-arc_sweep_deg
    perspective_jitter: float = 0.18  # corner displacement as a fraction of size
    noise_std: float = 0.04
    blur_radius: int = 1
    scale_min: int = 3
    scale_max: int = 5
    out_height: int = 32
    out_width: int = 64
    word_fraction: float = 0.5  # rest are uniform random strings

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown distortion mode {self.mode!r} (choose from {MODES})")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("word length range invalid")


@dataclass
class Sample:
    image: np.ndarray  # uint8 [h, w]
    label: str


def _sample_rng(spec: SynthSpec, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=spec.seed, spawn_key=(index,)))


def _placements(n: int, gw: int, spacing: int, sweep_rad: float):
    """Centers (row, col) and per-glyph tilt angles for a word of n glyphs.

    sweep 0 lays glyphs on a straight baseline; otherwise along a circular
    arc with the given total sweep. Positive sweep bows the text upward
    (apex at the middle glyph), negative downward.
    """
    pitch = gw + spacing
    length = n * gw + (n - 1) * spacing
    s = np.arange(n) * pitch + gw / 2.0 - length / 2.0  # signed arc distance from middle
    if sweep_rad == 0.0:
        return [(0.0, float(x)) for x in s], [0.0] * n
    sign = 1.0 if sweep_rad > 0 else -1.0
    radius = length / abs(sweep_rad)
    phi = s / radius
    rows = sign * radius * (1.0 - np.cos(phi))  # ends sag below the apex for an up-bow
    cols = radius * np.sin(phi)
    tilts = -sign * np.rad2deg(phi)  # glyph tops lean radially outward
    return list(zip(rows.tolist(), cols.tolist())), tilts.tolist()


def _paste(canvas: np.ndarray, tile: np.ndarray, center_r: float, center_c: float) -> None:
    th, tw = tile.shape
    r0 = int(round(center_r - th / 2.0))
    c0 = int(round(center_c - tw / 2.0))
    r1, c1 = r0 + th, c0 + tw
    cr0, cc0 = max(r0, 0), max(c0, 0)
    cr1, cc1 = min(r1, canvas.shape[0]), min(c1, canvas.shape[1])
    if cr0 >= cr1 or cc0 >= cc1:
        return
    patch = tile[cr0 - r0 : cr1 - r0, cc0 - c0 : cc1 - c0]
    region = canvas[cr0:cr1, cc0:cc1]
    np.maximum(region, patch, out=region)


def render(word: str, spec: SynthSpec, rng: np.random.Generator) -> Sample:
    """Rasterize one word with the spec's distortion mode applied."""
    if not spec.min_len <= len(word) <= spec.max_len:
        raise ValueError(f"word length {len(word)} outside [{spec.min_len}, {spec.max_len}]")
    masks = [glyph(ch) for ch in word]  # raises on out-of-vocab characters

    mode = spec.mode
    if mode == "mixed":
        mode = ("none", "rotate", "arc")[rng.integers(0, 3)]

    s = int(rng.integers(spec.scale_min, spec.scale_max + 1))
    kron = np.ones((s, s))
    tiles = [np.kron(m, kron) for m in masks]
    gw, gh = GLYPH_WIDTH * s, GLYPH_HEIGHT * s
    spacing = s

    sweep = 0.0
    if mode == "arc" and spec.arc_sweep_deg:
        sweep = np.deg2rad(rng.uniform(-spec.arc_sweep_deg, spec.arc_sweep_deg))
    centers, angles = _placements(len(word), gw, spacing, sweep)

    # Fixed-pitch canvas: sized for max_len regardless of the actual word, with
    # words left-aligned, so character index t always lands at the same
    # horizontal image fraction. Vertical room covers the worst-case arc rise.
    span_max = spec.max_len * gw + (spec.max_len - 1) * spacing
    length = len(word) * gw + (len(word) - 1) * spacing
    margin = s
    width = span_max + 2 * margin
    height = 3 * gh
    rows = [r for r, _ in centers]
    canvas = np.zeros((height, width))
    off_r = height / 2.0 - (min(rows) + max(rows)) / 2.0
    off_c = margin + length / 2.0  # placements are centered on 0
    for tile, (r, c), ang in zip(tiles, centers, angles):
        if ang != 0.0:
            tile = imgops.rotate(tile, ang)
        _paste(canvas, tile, r + off_r, c + off_c)

    if mode == "rotate":
        canvas = imgops.rotate(canvas, float(rng.uniform(-spec.rotation_deg, spec.rotation_deg)))
    elif mode == "perspective":
        h, w = canvas.shape
        src = np.array([(0, 0), (w - 1.0, 0), (w - 1.0, h - 1.0), (0, h - 1.0)])
        jit = rng.uniform(-spec.perspective_jitter, spec.perspective_jitter, size=(4, 2))
        dst = src + jit * np.array([w, h])
        hom = imgops.homography_from_points(src, dst)
        canvas = imgops.warp_perspective(canvas, hom, canvas.shape)

    img = imgops.bilinear_resize(canvas, spec.out_height, spec.out_width)
    if spec.blur_radius:
        img = imgops.box_blur(img, spec.blur_radius)
    if spec.noise_std:
        img = img + rng.normal(0.0, spec.noise_std, size=img.shape)
    img = np.clip(img, 0.0, 1.0)
    return Sample(image=np.rint(img * 255.0).astype(np.uint8), label=word)


def sample_word(spec: SynthSpec, rng: np.random.Generator) -> str:
    """Draw a label: an embedded word or a uniform random string."""
    candidates = [w for w in WORDS if spec.min_len <= len(w) <= spec.max_len]
    if candidates and rng.random() < spec.word_fraction:
        return candidates[rng.integers(0, len(candidates))]
    length = int(rng.integers(spec.min_len, spec.max_len + 1))
    return "".join(VOCAB.chars[i] for i in rng.integers(0, len(VOCAB.chars), size=length))


def generate_sample(spec: SynthSpec, index: int) -> Sample:
    rng = _sample_rng(spec, index)
    return render(sample_word(spec, rng), spec, rng)


def generate_dataset(n: int, spec: SynthSpec, out_dir: str | os.PathLike) -> list[tuple[str, str]]:
    """Write n samples and a labels.tsv manifest; returns (relpath, label) pairs."""
    if n < 1:
        raise ValueError("dataset size must be >= 1")
    out_dir = os.fspath(out_dir)
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    manifest = []
    for i in range(n):
        sample = generate_sample(spec, i)
        rel = f"images/{i:05d}.pgm"
        write_pgm(os.path.join(out_dir, rel), sample.image)
        manifest.append((rel, sample.label))
    with open(os.path.join(out_dir, "labels.tsv"), "w", encoding="utf-8", newline="\n") as f:
        for rel, label in manifest:
            f.write(f"{rel}\t{label}\n")
    return manifest


def load_dataset(data_dir: str | os.PathLike) -> list[Sample]:
    """Read a dataset back; exact inverse of generate_dataset's writes."""
    data_dir = os.fspath(data_dir)
    manifest_path = os.path.join(data_dir, "labels.tsv")
    if not os.path.exists(manifest_path):
        raise FileNotFoundError(f"no labels.tsv in {data_dir}")
    samples = []
    with open(manifest_path, encoding="utf-8", newline="\n") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{manifest_path}:{lineno}: malformed line (no tab separator)")
            rel, label = line.split("\t", 1)
            path = os.path.join(data_dir, rel)
            if not os.path.exists(path):
                raise FileNotFoundError(f"{manifest_path}:{lineno}: missing image file {path}")
            samples.append(Sample(image=read_pgm(path), label=label))
    return samples
