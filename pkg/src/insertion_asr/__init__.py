"""Insertion-based sequence transduction with joint CTC training.

Toy-scale transformer models (autoregressive, InDIGO, Insertion Transformer,
KERMIT) trained on synthetic speech-like feature/transcript pairs, with
autoregressive and non-autoregressive insertion decoding and a CTC readout.
"""

__version__ = "0.1.0"
