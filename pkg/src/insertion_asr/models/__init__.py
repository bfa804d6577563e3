from .config import ModelConfig, Variant
from .network import (
    build_parameters,
    encode,
    inst_forward,
    kermit_forward,
    at_forward,
    indigo_pass,
    KermitOutput,
)

__all__ = [
    "ModelConfig",
    "Variant",
    "build_parameters",
    "encode",
    "inst_forward",
    "kermit_forward",
    "at_forward",
    "indigo_pass",
    "KermitOutput",
]
