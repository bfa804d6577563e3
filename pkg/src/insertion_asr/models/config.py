"""Model architecture configuration."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from ..vocab import Vocabulary


class Variant(enum.Enum):
    AT = "at"
    INDIGO = "indigo"
    INSERTION_TRANSFORMER = "insertion_transformer"
    KERMIT = "kermit"


ENCODER_DECODER_VARIANTS = (Variant.AT, Variant.INDIGO, Variant.INSERTION_TRANSFORMER)


@dataclass(frozen=True)
class ModelConfig:
    vocab: Vocabulary
    variant: Variant
    attention_dim: int = 64
    heads: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    ffn_dim: int = 128
    feature_dim: int = 16
    frame_stack: int = 2
    max_frames: int = 512
    max_tokens: int = 64
    ctc_weight: float = 0.0

    def __post_init__(self):
        if self.attention_dim % self.heads != 0:
            raise ValueError("attention_dim must be divisible by heads")
        if not 0.0 <= self.ctc_weight <= 1.0:
            raise ValueError("ctc_weight must lie in [0, 1]")
        if self.variant is Variant.KERMIT and self.decoder_layers != 0:
            raise ValueError("the encoder-only variant has no decoder layers")
        if self.frame_stack < 1:
            raise ValueError("frame_stack must be >= 1")

    @property
    def max_stacked_frames(self) -> int:
        return -(-self.max_frames // self.frame_stack)
