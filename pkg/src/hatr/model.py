"""The full recognizer: one encoder plus one or two direction decoders.

Parameter initialization flows from a single seed through named
sub-streams, so two models built with the same configs and seed are
bit-identical. In bidirectional mode the two decoders share nothing.
"""

from __future__ import annotations

import numpy as np

from .autodiff import ConfigError, Tensor
from .bidir import validate_direction
from .decoder import Decoder, DecoderConfig
from .encoder import Encoder, EncoderConfig
from .vocab import VOCAB


class Recognizer:
    def __init__(
        self,
        encoder_config: EncoderConfig,
        decoder_config: DecoderConfig,
        direction: str = "normal",
        seed: int = 0,
    ):
        if encoder_config.use_holistic and encoder_config.holistic_dim != decoder_config.d // 2:
            raise ConfigError(
                f"holistic_dim {encoder_config.holistic_dim} must equal d/2 = "
                f"{decoder_config.d // 2} (it fills half of every fused input)"
            )
        if encoder_config.feature_dim != decoder_config.d:
            raise ConfigError(
                f"encoder feature_dim {encoder_config.feature_dim} must equal decoder "
                f"d {decoder_config.d} (the feature map is the attention key/value set)"
            )
        self.encoder_config = encoder_config
        self.decoder_config = decoder_config
        self.direction = validate_direction(direction)
        self.seed = seed
        self.vocab = VOCAB

        ss = np.random.SeedSequence(entropy=seed, spawn_key=(0,))
        enc_ss, dec_n_ss, dec_r_ss = ss.spawn(3)
        self.encoder = Encoder(encoder_config, np.random.default_rng(enc_ss))
        self.decoders: dict[str, Decoder] = {}
        if self.direction in ("normal", "bidirectional"):
            self.decoders["normal"] = Decoder(decoder_config, np.random.default_rng(dec_n_ss))
        if self.direction in ("reversed", "bidirectional"):
            self.decoders["reversed"] = Decoder(decoder_config, np.random.default_rng(dec_r_ss))

    def encode_images(self, images: np.ndarray, training: bool) -> tuple[Tensor, Tensor | None]:
        """uint8 images [n, h, w] (or [n, h, w, c]) -> (featmap, holistic)."""
        arr = np.asarray(images, dtype=np.float64)
        if arr.ndim == 3:
            arr = arr[..., None]
        x = Tensor(arr / 127.5 - 1.0)
        return self.encoder.forward(x, training)

    def named_params(self):
        yield from self.encoder.named_params("encoder")
        for direction in sorted(self.decoders):
            yield from self.decoders[direction].named_params(f"decoder.{direction}")

    def named_buffers(self):
        yield from self.encoder.named_buffers("encoder")

    def param_count(self) -> int:
        return sum(t.size for _, t in self.named_params())

    def zero_grads(self) -> None:
        for _, t in self.named_params():
            t.grad = None
