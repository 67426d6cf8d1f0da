"""Run configuration: flat ``key = value`` text with section prefixes.

One file (plus command-line overrides) resolves every module's config
before anything runs. Unknown keys are rejected; the effective config can
be echoed back out as text that parses to an identical configuration.

Pseudo-keys ``encoder.preset`` and ``decoder.preset`` (values ``desk`` or
``paper``) swap in preset defaults before explicit keys apply; the echo
contains only real fields. A single top-level ``seed`` feeds every
module's rng stream unless ``train.seed`` / ``synth.seed`` are given
explicitly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .pipeline import BeamConfig
from .synth import SynthSpec
from .trainer import TrainConfig


class ConfigKeyError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    beam: BeamConfig = field(default_factory=BeamConfig)
    synth: SynthSpec = field(default_factory=SynthSpec)


_SECTIONS = ("encoder", "decoder", "train", "beam", "synth")


def _parse_value(key: str, raw: str, default) -> object:
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(p) for p in raw.split(","))
        return raw
    except ValueError as e:
        raise ConfigKeyError(f"bad value for {key}: {e}") from None


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, source: str = "<config>") -> list[tuple[str, str]]:
    """'key = value' per line; '#' comments and blank lines ignored."""
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigKeyError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        pairs.append((key.strip(), value.strip()))
    return pairs


def load_config_file(path: str) -> list[tuple[str, str]]:
    with open(path, encoding="utf-8") as f:
        return parse_config_text(f.read(), source=path)


def build_config(pairs: list[tuple[str, str]]) -> RunConfig:
    """Resolve pairs (file order, later wins) into a full RunConfig."""
    sections: dict[str, object] = {
        "encoder": EncoderConfig(),
        "decoder": DecoderConfig(),
        "train": TrainConfig(),
        "beam": BeamConfig(),
        "synth": SynthSpec(),
    }
    # presets replace section defaults before any explicit key applies
    for key, value in pairs:
        if key == "encoder.preset":
            sections["encoder"] = EncoderConfig.preset(value)
        elif key == "decoder.preset":
            sections["decoder"] = DecoderConfig.preset(value)

    seed = 0
    explicit: set[str] = set()
    for key, value in pairs:
        if key in ("encoder.preset", "decoder.preset"):
            continue
        if key == "seed":
            seed = int(value)
            explicit.add(key)
            continue
        section, _, fieldname = key.partition(".")
        if section not in _SECTIONS or not fieldname:
            raise ConfigKeyError(f"unknown config key {key!r}")
        target = sections[section]
        names = {f.name for f in dataclasses.fields(target)}
        if fieldname not in names:
            raise ConfigKeyError(f"unknown config key {key!r}")
        default = getattr(target, fieldname)
        setattr(target, fieldname, _parse_value(key, value, default))
        explicit.add(key)

    if "train.seed" not in explicit:
        sections["train"].seed = seed
    if "synth.seed" not in explicit:
        sections["synth"].seed = seed
    cfg = RunConfig(seed=seed, **sections)
    cfg.synth.__post_init__()  # revalidate mutated fields
    return cfg


def format_config(cfg: RunConfig) -> str:
    """Echo every field as 'key = value', sorted; parses back identically."""
    lines = [f"seed = {cfg.seed}"]
    for section in _SECTIONS:
        target = getattr(cfg, section)
        for f in dataclasses.fields(target):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(target, f.name))}")
    return "\n".join(sorted(lines)) + "\n"
