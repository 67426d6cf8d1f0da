"""Convolutional image encoder: 2D feature map + 1D holistic vector.

The backbone is a stem conv followed by four stages of stride-1 basic
blocks with three 2x2 max-pools interleaved (after the stem, after stage 1
and after stage 2), so the spatial grid always comes out at (h/8, w/8).
Two branches hang off the final stage: a plain 1x1 convolution projecting
to the attention width, and a holistic extractor (a stack of bottleneck
blocks, global average pooling and a linear layer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    BatchNormState,
    ConfigError,
    Tensor,
    add,
    avgpool_global,
    batchnorm2d,
    conv2d,
    linear,
    maxpool2d,
    parameter,
    relu,
)


@dataclass
class EncoderConfig:
    input_height: int = 32
    input_width: int = 64
    input_channels: int = 1
    channel_widths: tuple[int, int, int, int] = (8, 16, 32, 64)
    blocks_per_stage: tuple[int, int, int, int] = (1, 1, 1, 1)
    feature_dim: int = 64
    holistic_dim: int = 32
    bottleneck_count: int = 2
    use_holistic: bool = True
    scale_preset: str = "desk"

    @classmethod
    def desk(cls, **overrides) -> "EncoderConfig":
        return cls(**overrides)

    @classmethod
    def paper(cls, **overrides) -> "EncoderConfig":
        base = dict(
            input_height=48,
            input_width=160,
            input_channels=3,
            channel_widths=(64, 128, 256, 512),
            blocks_per_stage=(3, 4, 6, 3),
            feature_dim=1024,
            holistic_dim=512,
            bottleneck_count=6,
            scale_preset="paper",
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def preset(cls, name: str, **overrides) -> "EncoderConfig":
        if name == "desk":
            return cls.desk(**overrides)
        if name == "paper":
            return cls.paper(**overrides)
        raise ConfigError(f"unknown encoder preset {name!r}")

    def validate(self) -> None:
        if self.input_height % 8 or self.input_width % 8:
            raise ConfigError(
                f"input {self.input_height}x{self.input_width} must be divisible by 8 "
                "(three 2x2 pools)"
            )
        if self.input_height < 8 or self.input_width < 8:
            raise ConfigError("input too small, spatial size collapses")
        if len(self.channel_widths) != 4 or len(self.blocks_per_stage) != 4:
            raise ConfigError("expected exactly four stages")
        if self.use_holistic and self.channel_widths[-1] % 4:
            raise ConfigError(
                f"last stage width {self.channel_widths[-1]} must be divisible by 4 "
                "for the bottleneck reduction"
            )

    @property
    def grid_height(self) -> int:
        return self.input_height // 8

    @property
    def grid_width(self) -> int:
        return self.input_width // 8


@dataclass
class FeatureMap2D:
    height: int
    width: int
    channels: int
    values: Tensor  # [n, height, width, channels]


@dataclass
class HolisticVector:
    values: Tensor  # [n, holistic_dim]


def normalize_image(img: np.ndarray) -> Tensor:
    """uint8 [h, w] or [h, w, c] pixels -> [-1, 1] float tensor [h, w, c]."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Tensor(arr / 127.5 - 1.0)


class Conv:
    """Conv kernel parameter with Kaiming fan-in init; 3x3 pads by 1."""

    def __init__(self, rng, kh: int, kw: int, cin: int, cout: int):
        fan_in = kh * kw * cin
        self.kernel = parameter(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(kh, kw, cin, cout)))
        self.padding = 1 if kh == 3 else 0

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.kernel, stride=1, padding=self.padding)

    def named_params(self, prefix):
        yield f"{prefix}.kernel", self.kernel


class BatchNorm:
    def __init__(self, channels: int):
        self.gain = parameter(np.ones(channels))
        self.bias = parameter(np.zeros(channels))
        self.state = BatchNormState(channels)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return batchnorm2d(x, self.gain, self.bias, self.state, training)

    def named_params(self, prefix):
        yield f"{prefix}.gain", self.gain
        yield f"{prefix}.bias", self.bias

    def named_buffers(self, prefix):
        yield f"{prefix}.running_mean", self.state.mean
        yield f"{prefix}.running_var", self.state.var


class BasicBlock:
    """Two 3x3 conv+BN with a residual shortcut (1x1 projection on width change)."""

    def __init__(self, rng, cin: int, cout: int):
        self.conv1 = Conv(rng, 3, 3, cin, cout)
        self.bn1 = BatchNorm(cout)
        self.conv2 = Conv(rng, 3, 3, cout, cout)
        self.bn2 = BatchNorm(cout)
        if cin != cout:
            self.proj = Conv(rng, 1, 1, cin, cout)
            self.proj_bn = BatchNorm(cout)
        else:
            self.proj = None
            self.proj_bn = None

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        y = relu(self.bn1(self.conv1(x), training))
        y = self.bn2(self.conv2(y), training)
        shortcut = x if self.proj is None else self.proj_bn(self.proj(x), training)
        return relu(add(y, shortcut))

    def _members(self):
        parts = [("conv1", self.conv1), ("bn1", self.bn1), ("conv2", self.conv2), ("bn2", self.bn2)]
        if self.proj is not None:
            parts += [("proj", self.proj), ("proj_bn", self.proj_bn)]
        return parts

    def named_params(self, prefix):
        for name, part in self._members():
            yield from part.named_params(f"{prefix}.{name}")

    def named_buffers(self, prefix):
        for name, part in self._members():
            if isinstance(part, BatchNorm):
                yield from part.named_buffers(f"{prefix}.{name}")


class Bottleneck:
    """1x1 reduce -> 3x3 -> 1x1 expand residual block (4x reduction inside)."""

    def __init__(self, rng, channels: int):
        if channels % 4:
            raise ConfigError(f"bottleneck channels {channels} not divisible by 4")
        mid = channels // 4
        self.conv1 = Conv(rng, 1, 1, channels, mid)
        self.bn1 = BatchNorm(mid)
        self.conv2 = Conv(rng, 3, 3, mid, mid)
        self.bn2 = BatchNorm(mid)
        self.conv3 = Conv(rng, 1, 1, mid, channels)
        self.bn3 = BatchNorm(channels)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        y = relu(self.bn1(self.conv1(x), training))
        y = relu(self.bn2(self.conv2(y), training))
        y = self.bn3(self.conv3(y), training)
        return relu(add(y, x))

    def _members(self):
        return [
            ("conv1", self.conv1), ("bn1", self.bn1),
            ("conv2", self.conv2), ("bn2", self.bn2),
            ("conv3", self.conv3), ("bn3", self.bn3),
        ]

    def named_params(self, prefix):
        for name, part in self._members():
            yield from part.named_params(f"{prefix}.{name}")

    def named_buffers(self, prefix):
        for name, part in self._members():
            if isinstance(part, BatchNorm):
                yield from part.named_buffers(f"{prefix}.{name}")


class Encoder:
    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        config.validate()
        self.config = config
        cw = config.channel_widths
        self.stem = Conv(rng, 3, 3, config.input_channels, cw[0])
        self.stem_bn = BatchNorm(cw[0])
        self.stages: list[list[BasicBlock]] = []
        cin = cw[0]
        for stage, (width, count) in enumerate(zip(cw, config.blocks_per_stage)):
            blocks = []
            for _ in range(count):
                blocks.append(BasicBlock(rng, cin, width))
                cin = width
            self.stages.append(blocks)
        self.proj = Conv(rng, 1, 1, cw[3], config.feature_dim)
        if config.use_holistic:
            self.bottlenecks = [Bottleneck(rng, cw[3]) for _ in range(config.bottleneck_count)]
            self.fc_weight = parameter(
                rng.normal(0.0, np.sqrt(1.0 / cw[3]), size=(config.holistic_dim, cw[3]))
            )
            self.fc_bias = parameter(np.zeros(config.holistic_dim))
        else:
            self.bottlenecks = []
            self.fc_weight = None
            self.fc_bias = None

    def backbone(self, images: Tensor, training: bool) -> Tensor:
        x = relu(self.stem_bn(self.stem(images), training))
        x = maxpool2d(x)
        x = self._run_stage(0, x, training)
        x = maxpool2d(x)
        x = self._run_stage(1, x, training)
        x = maxpool2d(x)
        x = self._run_stage(2, x, training)
        return self._run_stage(3, x, training)

    def _run_stage(self, i: int, x: Tensor, training: bool) -> Tensor:
        for block in self.stages[i]:
            x = block(x, training)
        return x

    def forward(self, images: Tensor, training: bool) -> tuple[Tensor, Tensor | None]:
        """images: [n, h, w, c] normalized to [-1, 1] -> featmap [n, h/8, w/8, d]
        and holistic [n, holistic_dim] (None with the branch disabled)."""
        trunk = self.backbone(images, training)
        featmap = self.proj(trunk)
        if not self.config.use_holistic:
            return featmap, None
        h = trunk
        for block in self.bottlenecks:
            h = block(h, training)
        pooled = avgpool_global(h)
        holistic = linear(pooled, self.fc_weight, self.fc_bias)
        return featmap, holistic

    def encode(self, image: Tensor, mode: str = "eval") -> tuple[FeatureMap2D, HolisticVector | None]:
        """Single [h, w, c] image; mode is 'train' or 'eval'."""
        if mode not in ("train", "eval"):
            raise ConfigError(f"unknown encoder mode {mode!r}")
        cfg = self.config
        if image.shape != (cfg.input_height, cfg.input_width, cfg.input_channels):
            raise ConfigError(
                f"image shape {image.shape} does not match configured input "
                f"({cfg.input_height}, {cfg.input_width}, {cfg.input_channels})"
            )
        batched = Tensor(image.data[None], requires_grad=image.requires_grad)
        featmap, holistic = self.forward(batched, training=(mode == "train"))
        fm = FeatureMap2D(
            height=featmap.shape[1],
            width=featmap.shape[2],
            channels=featmap.shape[3],
            values=featmap,
        )
        return fm, (HolisticVector(values=holistic) if holistic is not None else None)

    def named_params(self, prefix="encoder"):
        yield from self.stem.named_params(f"{prefix}.stem")
        yield from self.stem_bn.named_params(f"{prefix}.stem_bn")
        for i, blocks in enumerate(self.stages):
            for j, block in enumerate(blocks):
                yield from block.named_params(f"{prefix}.stage{i}.block{j}")
        yield from self.proj.named_params(f"{prefix}.proj")
        for j, block in enumerate(self.bottlenecks):
            yield from block.named_params(f"{prefix}.holistic.bottleneck{j}")
        if self.fc_weight is not None:
            yield f"{prefix}.holistic.fc.weight", self.fc_weight
            yield f"{prefix}.holistic.fc.bias", self.fc_bias

    def named_buffers(self, prefix="encoder"):
        yield from self.stem_bn.named_buffers(f"{prefix}.stem_bn")
        for i, blocks in enumerate(self.stages):
            for j, block in enumerate(blocks):
                yield from block.named_buffers(f"{prefix}.stage{i}.block{j}")
        for j, block in enumerate(self.bottlenecks):
            yield from block.named_buffers(f"{prefix}.holistic.bottleneck{j}")
