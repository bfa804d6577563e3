"""Parameter construction and forward passes for the four model variants.

Encoder-decoder variants (AT, InDIGO, Insertion Transformer) share one
feature encoder; their CTC head reads the encoder output, so that scores are
independent of the partial hypothesis. The encoder-only variant concatenates
stacked feature columns and canvas token columns into a single self-attention
stack and slices the output back apart: the feature slice feeds the CTC head
(now conditioned on the canvas through shared attention), the token slice
feeds the slot head.

Slot scoring: the representation of gap k joins the states of its left and
right neighbors; the outermost gaps use sentinel queries that read the
feature states through a single attention, so even an empty canvas scores
slots input-dependently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..params import ParameterStore
from .config import ModelConfig, Variant
from .layers import (
    add_block,
    add_layer_norm,
    add_linear,
    attention,
    block,
    layer_norm,
    linear,
    sinusoid_positions,
    stack_frames,
)


def build_parameters(cfg: ModelConfig, seed: int) -> ParameterStore:
    rng = np.random.default_rng(seed)
    p = ParameterStore()
    b = cfg.attention_dim
    vocab = cfg.vocab

    add_linear(p, "enc.in", cfg.feature_dim * cfg.frame_stack, b, rng)
    for i in range(cfg.encoder_layers):
        add_block(p, f"enc.{i}", b, cfg.heads, cfg.ffn_dim, rng)
    add_layer_norm(p, "enc.out_ln", b, rng)

    p.create("emb.tok", (vocab.n_content, b), rng)
    if cfg.variant is Variant.KERMIT:
        p.create("emb.seg", (2, b), rng)
    else:
        for i in range(cfg.decoder_layers):
            add_block(p, f"dec.{i}", b, cfg.heads, cfg.ffn_dim, rng,
                      cross=True, relative=cfg.variant is Variant.INDIGO)
        add_layer_norm(p, "dec.out_ln", b, rng)
    if cfg.variant in (Variant.AT, Variant.INDIGO):
        p.create("dec.bos", (1, b), rng)

    add_linear(p, "head.word", b, vocab.word_dim, rng)
    add_linear(p, "head.ctc", b, vocab.ctc_dim, rng)
    if cfg.variant in (Variant.INSERTION_TRANSFORMER, Variant.KERMIT):
        add_linear(p, "slot.join", 2 * b, b, rng)
        add_linear(p, "slot.pos", b, 1, rng)
        p.create("slot.left", (1, b), rng)
        p.create("slot.right", (1, b), rng)
        p.create("slot.ctx.wk", (b, b), rng)
        p.create("slot.ctx.wv", (b, b), rng)
    if cfg.variant is Variant.INDIGO:
        add_linear(p, "ptr.q", 2 * b, b, rng, bias=False)
        add_linear(p, "ptr.k", b, b, rng, bias=False)
    return p


# -- feature encoder ----------------------------------------------------------


def _feature_columns(p: ParameterStore, cfg: ModelConfig, features: np.ndarray) -> ad.Tensor:
    stacked = stack_frames(features, cfg.frame_stack)
    if stacked.shape[0] > cfg.max_stacked_frames:
        raise ValueError(f"input of {stacked.shape[0]} stacked frames exceeds the configured maximum")
    x = linear(p, "enc.in", ad.constant(stacked))
    return ad.add(x, ad.constant(sinusoid_positions(stacked.shape[0], cfg.attention_dim)))


def encode(p: ParameterStore, cfg: ModelConfig, features: np.ndarray) -> ad.Tensor:
    """Feature sequence (T, d) -> encoder states (ceil(T/stack), b)."""
    x = _feature_columns(p, cfg, features)
    for i in range(cfg.encoder_layers):
        x = block(p, f"enc.{i}", x, cfg.heads)
    return layer_norm(p, "enc.out_ln", x)


def ctc_logits_from(p: ParameterStore, states: ad.Tensor) -> ad.Tensor:
    return linear(p, "head.ctc", states)


# -- slot scoring -------------------------------------------------------------


def _context_readout(p: ParameterStore, query: ad.Tensor, feature_states: ad.Tensor, dim: int) -> ad.Tensor:
    keys = ad.matmul(feature_states, p["slot.ctx.wk"])
    values = ad.matmul(feature_states, p["slot.ctx.wv"])
    scores = ad.mul(ad.matmul(query, ad.transpose(keys)), dim**-0.5)
    return ad.matmul(ad.softmax(scores, axis=1), values)


def slot_scores(p: ParameterStore, cfg: ModelConfig, token_states: ad.Tensor,
                feature_states: ad.Tensor) -> tuple[ad.Tensor, ad.Tensor]:
    """Per-gap word logits (n+1, word_dim) and position scores (n+1, 1)."""
    b = cfg.attention_dim
    left_edge = _context_readout(p, p["slot.left"], feature_states, b)
    right_edge = _context_readout(p, p["slot.right"], feature_states, b)
    lefts = ad.concat([left_edge, token_states], axis=0)
    rights = ad.concat([token_states, right_edge], axis=0)
    reprs = ad.tanh(linear(p, "slot.join", ad.concat([lefts, rights], axis=1)))
    word_logits = linear(p, "head.word", reprs)
    pos_scores = linear(p, "slot.pos", reprs)
    return word_logits, pos_scores


# -- encoder-decoder variants -------------------------------------------------


def _token_columns(p: ParameterStore, cfg: ModelConfig, tokens, bos: bool) -> ad.Tensor:
    parts = []
    if bos:
        parts.append(p["dec.bos"])
    if len(tokens):
        parts.append(ad.gather_rows(p["emb.tok"], tokens))
    x = parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)
    n = x.value.shape[0]
    return ad.add(x, ad.constant(sinusoid_positions(n, cfg.attention_dim)))


def inst_forward(p: ParameterStore, cfg: ModelConfig, enc_states: ad.Tensor,
                 canvas_tokens) -> tuple[ad.Tensor, ad.Tensor]:
    """Insertion-Transformer slot scores for a sorted canvas.

    Canvas self-attention is fully bidirectional; every decoder layer also
    cross-attends to the feature states.
    """
    canvas_tokens = tuple(canvas_tokens)
    if len(canvas_tokens) > cfg.max_tokens:
        raise ValueError("canvas exceeds the configured maximum length")
    if canvas_tokens:
        x = _token_columns(p, cfg, canvas_tokens, bos=False)
        for i in range(cfg.decoder_layers):
            x = block(p, f"dec.{i}", x, cfg.heads, memory=enc_states)
        states = layer_norm(p, "dec.out_ln", x)
    else:
        states = ad.constant(np.zeros((0, cfg.attention_dim)))
    return slot_scores(p, cfg, states, enc_states)


def decoder_states(p: ParameterStore, cfg: ModelConfig, enc_states: ad.Tensor, tokens,
                   relations: np.ndarray | None = None) -> ad.Tensor:
    """Causal decoder pass over [start; tokens]; row k sees rows <= k.

    With ``relations`` given (InDIGO), self-attention uses the relative-order
    bias instead of absolute positions.
    """
    tokens = tuple(tokens)
    n = len(tokens) + 1
    if relations is None:
        x = _token_columns(p, cfg, tokens, bos=True)
    else:
        parts = [p["dec.bos"]]
        if tokens:
            parts.append(ad.gather_rows(p["emb.tok"], tokens))
        x = parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)
        if relations.shape != (n, n):
            raise ValueError("relative-position matrix does not match the prefix")
    causal = np.triu(np.ones((n, n), dtype=bool), k=1)
    for i in range(cfg.decoder_layers):
        x = block(p, f"dec.{i}", x, cfg.heads, memory=enc_states,
                  self_mask=causal, relations=relations)
    return layer_norm(p, "dec.out_ln", x)


def at_forward(p: ParameterStore, cfg: ModelConfig, enc_states: ad.Tensor, prefix) -> ad.Tensor:
    """Teacher-forcing word logits: row k predicts the token after prefix[:k]."""
    states = decoder_states(p, cfg, enc_states, prefix)
    return linear(p, "head.word", states)


def indigo_pass(p: ParameterStore, cfg: ModelConfig, enc_states: ad.Tensor, tokens,
                surface_ranks) -> ad.Tensor:
    """Decoder states over [start; tokens] in insertion order.

    ``surface_ranks`` gives each token's current surface position (1-based);
    the start column ranks 0, left of everything. Self-attention scores use
    the sign of rank differences as a three-class relative encoding.
    """
    ranks = np.concatenate(([0], np.asarray(surface_ranks, dtype=np.int64)))
    relations = np.sign(ranks[:, None] - ranks[None, :]).astype(np.int64)
    return decoder_states(p, cfg, enc_states, tokens, relations=relations)


def pointer_scores(p: ParameterStore, cfg: ModelConfig, dec_states: ad.Tensor,
                   step_col: int, word_id: int) -> ad.Tensor:
    """Anchor scores (1, step_col) for inserting ``word_id`` at a given step.

    Anchors are the token columns 1..step_col of the decoder; choosing one
    puts the new token immediately to its right in surface order.
    """
    if step_col < 1:
        raise ValueError("no anchors before the first token is placed")
    h = ad.narrow(dec_states, 0, step_col, 1)
    emb = ad.gather_rows(p["emb.tok"], [word_id])
    query = ad.tanh(linear(p, "ptr.q", ad.concat([h, emb], axis=1)))
    keys = linear(p, "ptr.k", ad.narrow(dec_states, 0, 1, step_col))
    return ad.matmul(query, ad.transpose(keys))


# -- encoder-only variant -----------------------------------------------------


@dataclass
class KermitOutput:
    feature_states: ad.Tensor  # (T', b) slice feeding the CTC head
    token_states: ad.Tensor  # (n, b) slice feeding the slot head
    slot_word_logits: ad.Tensor
    slot_pos_scores: ad.Tensor
    ctc_logits: ad.Tensor


def kermit_forward(p: ParameterStore, cfg: ModelConfig, features: np.ndarray,
                   canvas_tokens) -> KermitOutput:
    canvas_tokens = tuple(canvas_tokens)
    if len(canvas_tokens) > cfg.max_tokens:
        raise ValueError("canvas exceeds the configured maximum length")
    feat = _feature_columns(p, cfg, features)
    t_cols = feat.value.shape[0]
    seg_feat = ad.narrow(p["emb.seg"], 0, 0, 1)
    x = ad.add(feat, seg_feat)
    n = len(canvas_tokens)
    if n:
        tok = _token_columns(p, cfg, canvas_tokens, bos=False)
        tok = ad.add(tok, ad.narrow(p["emb.seg"], 0, 1, 1))
        x = ad.concat([x, tok], axis=0)
    for i in range(cfg.encoder_layers):
        x = block(p, f"enc.{i}", x, cfg.heads)
    states = layer_norm(p, "enc.out_ln", x)
    feature_states = ad.narrow(states, 0, 0, t_cols)
    token_states = ad.narrow(states, 0, t_cols, n)
    word_logits, pos_scores = slot_scores(p, cfg, token_states, feature_states)
    return KermitOutput(
        feature_states=feature_states,
        token_states=token_states,
        slot_word_logits=word_logits,
        slot_pos_scores=pos_scores,
        ctc_logits=ctc_logits_from(p, feature_states),
    )
