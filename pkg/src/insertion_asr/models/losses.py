"""Training objectives: left-to-right traces, sampled balanced-binary slot
targets, and the CTC-weighted joint objective.

Sequence scores follow the insertion factorization: the probability of a
sequence under a given order is the product over steps of
p(token | slot) * p(slot), scored against the sorted prefix so far. Training
additionally includes a termination term (every slot of the completed canvas
must predict end-of-slot) so greedy and parallel decoding can stop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..ctc import CtcInfeasibleError, ctc_loss_node
from ..orders import InsertionOrder, Prior, apply_order, bbt_generations, _bbt_pick
from ..params import ParameterStore
from .config import ModelConfig, Variant
from .network import (
    at_forward,
    ctc_logits_from,
    encode,
    indigo_pass,
    inst_forward,
    kermit_forward,
    pointer_scores,
)
from .layers import linear


def cross_entropy(logits: ad.Tensor, target_cols, reduce: str = "sum") -> ad.Tensor:
    """Softmax cross-entropy of each row against its target column."""
    cols = np.asarray(target_cols, dtype=np.int64)
    n, w = logits.value.shape
    if len(cols) != n:
        raise ValueError("one target per logits row required")
    onehot = np.zeros((n, w))
    onehot[np.arange(n), cols] = 1.0
    picked = ad.total(ad.mul(ad.log_softmax(logits, axis=1), ad.constant(onehot)))
    loss = ad.mul(picked, -1.0)
    if reduce == "mean":
        loss = ad.mul(loss, 1.0 / n)
    return loss


@dataclass
class InsertionLoss:
    loss: ad.Tensor
    word: float = 0.0
    position: float = 0.0
    termination: float = 0.0
    ctc_logits: ad.Tensor | None = None  # encoder-only variant: canvas-conditioned


def _sum(terms: list[ad.Tensor]) -> ad.Tensor:
    out = terms[0]
    for t in terms[1:]:
        out = ad.add(out, t)
    return out


# -- left-to-right trace loss --------------------------------------------------


def l2r_loss(p: ParameterStore, cfg: ModelConfig, features: np.ndarray, tokens) -> InsertionLoss:
    """Negative log-likelihood of the full left-to-right generation trace."""
    tokens = tuple(tokens)
    cfg.vocab.validate_sequence(tokens)
    if cfg.variant is Variant.AT:
        return _l2r_at(p, cfg, features, tokens)
    if cfg.variant is Variant.INDIGO:
        return _l2r_indigo(p, cfg, features, tokens)
    return _l2r_slots(p, cfg, features, tokens)


def _l2r_at(p, cfg, features, tokens) -> InsertionLoss:
    enc = encode(p, cfg, features)
    logits = at_forward(p, cfg, enc, tokens)
    n = len(tokens)
    eos = cfg.vocab.eos_col
    total = cross_entropy(logits, list(tokens) + [eos])
    if n:
        word = cross_entropy(ad.narrow(logits, 0, 0, n), list(tokens))
        term = total.item() - word.item()
        return InsertionLoss(total, word=word.item(), termination=term)
    return InsertionLoss(total, termination=total.item())


def _l2r_indigo(p, cfg, features, tokens) -> InsertionLoss:
    enc = encode(p, cfg, features)
    n = len(tokens)
    states = indigo_pass(p, cfg, enc, tokens, surface_ranks=range(1, n + 1))
    logits = linear(p, "head.word", states)
    eos = cfg.vocab.eos_col
    terms = [cross_entropy(logits, list(tokens) + [eos])]
    word = cross_entropy(ad.narrow(logits, 0, 0, n), list(tokens)).item() if n else 0.0
    position = 0.0
    # anchor target: append to the right of the previous token
    for step in range(2, n + 1):
        scores = pointer_scores(p, cfg, states, step_col=step - 1, word_id=tokens[step - 1])
        pos_term = cross_entropy(scores, [step - 2])
        position += pos_term.item()
        terms.append(pos_term)
    total = _sum(terms)
    return InsertionLoss(total, word=word, position=position,
                         termination=total.item() - word - position)


def _slot_pass(p, cfg, features, enc, canvas):
    """Slot scores for one canvas under either slot-scoring variant."""
    if cfg.variant is Variant.KERMIT:
        out = kermit_forward(p, cfg, features, canvas)
        return out.slot_word_logits, out.slot_pos_scores, out.ctc_logits
    word, pos = inst_forward(p, cfg, enc, canvas)
    return word, pos, None


def _l2r_slots(p, cfg, features, tokens) -> InsertionLoss:
    enc = encode(p, cfg, features) if cfg.variant is Variant.INSERTION_TRANSFORMER else None
    n = len(tokens)
    eos = cfg.vocab.eos_col
    terms = []
    word = position = 0.0
    for step in range(1, n + 1):
        canvas = tokens[: step - 1]
        gap = step - 1
        word_logits, pos_scores, _ = _slot_pass(p, cfg, features, enc, canvas)
        w = cross_entropy(ad.narrow(word_logits, 0, gap, 1), [tokens[step - 1]])
        pos = cross_entropy(ad.transpose(pos_scores), [gap])
        word += w.item()
        position += pos.item()
        terms.extend([w, pos])
    word_logits, _, ctc_logits = _slot_pass(p, cfg, features, enc, tokens)
    term = cross_entropy(word_logits, [eos] * (n + 1), reduce="mean")
    terms.append(term)
    return InsertionLoss(_sum(terms), word=word, position=position,
                         termination=term.item(), ctc_logits=ctc_logits)


# -- balanced-binary slot loss ---------------------------------------------------


def bbt_canvas_and_targets(tokens, generation: int) -> tuple[tuple[int, ...], tuple[int | None, ...]]:
    """Canvas after ``generation`` parallel rounds plus per-slot targets.

    Targets are token ids (the centermost of each uncovered span) or None for
    finished spans, which train toward end-of-slot. ``generation`` ranges
    0..len(bbt_generations): the last value is the completed canvas.
    """
    tokens = tuple(tokens)
    n = len(tokens)
    gens = bbt_generations(n)
    if not 0 <= generation <= len(gens):
        raise ValueError(f"generation {generation} out of range")
    present = sorted(i for gen in gens[:generation] for i in gen)
    canvas = tuple(tokens[i - 1] for i in present)
    center = (1 + n) / 2.0
    bounds = [0] + present + [n + 1]
    targets: list[int | None] = []
    for k in range(len(present) + 1):
        lo, hi = bounds[k] + 1, bounds[k + 1] - 1
        if lo > hi:
            targets.append(None)
        else:
            targets.append(tokens[_bbt_pick(lo, hi, center) - 1])
    return canvas, tuple(targets)


def bbt_slot_loss(p: ParameterStore, cfg: ModelConfig, features: np.ndarray, tokens,
                  generation: int) -> InsertionLoss:
    """Mean per-slot cross-entropy at one sampled balanced-binary generation."""
    tokens = tuple(tokens)
    cfg.vocab.validate_sequence(tokens)
    canvas, targets = bbt_canvas_and_targets(tokens, generation)
    enc = encode(p, cfg, features) if cfg.variant is Variant.INSERTION_TRANSFORMER else None
    word_logits, _, ctc_logits = _slot_pass(p, cfg, features, enc, canvas)
    eos = cfg.vocab.eos_col
    cols = [eos if t is None else t for t in targets]
    loss = cross_entropy(word_logits, cols, reduce="mean")
    return InsertionLoss(loss, word=loss.item(), ctc_logits=ctc_logits)


# -- joint objective -----------------------------------------------------------


@dataclass
class JointLoss:
    total: ad.Tensor | None
    parts: dict = field(default_factory=dict)
    ctc_skipped: bool = False


def joint_loss(insertion: InsertionLoss | None, ctc_log_probs: ad.Tensor | None,
               targets, alpha: float) -> JointLoss:
    """alpha * ctc + (1 - alpha) * insertion, with infeasible CTC dropped."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    parts: dict = {"insertion": None, "ctc": None}
    ctc_term = None
    skipped = False
    if alpha > 0.0:
        if ctc_log_probs is None:
            raise ValueError("alpha > 0 requires CTC log-probabilities")
        try:
            ctc_term = ctc_loss_node(ctc_log_probs, targets)
            parts["ctc"] = ctc_term.item()
        except CtcInfeasibleError:
            skipped = True
    if insertion is not None:
        parts["insertion"] = insertion.loss.item()
        parts.update(word=insertion.word, position=insertion.position,
                     termination=insertion.termination)
    if alpha == 0.0 or (skipped and insertion is not None):
        total = insertion.loss if insertion is not None else None
    elif alpha == 1.0 or insertion is None:
        total = ctc_term
    else:
        total = ad.add(ad.mul(ctc_term, alpha), ad.mul(insertion.loss, 1.0 - alpha))
    if total is not None:
        parts["total"] = total.item()
    return JointLoss(total, parts, ctc_skipped=skipped)


def training_loss(p: ParameterStore, cfg: ModelConfig, features: np.ndarray, tokens,
                  prior, alpha: float, rng: np.random.Generator) -> JointLoss:
    """One training sample's objective under the configured prior and weight.

    alpha = 1 trains the pure CTC model (empty canvas for the encoder-only
    variant). The balanced-binary prior trains a single uniformly sampled
    generation per call. The CTC term reads the encoder states for
    encoder-decoder variants and the canvas-conditioned feature slice for the
    encoder-only variant (the completed canvas under the left-to-right prior,
    the sampled canvas under the balanced-binary prior).
    """
    tokens = tuple(tokens)
    insertion = None
    ctc_logits = None
    if alpha < 1.0:
        if prior is Prior.L2R:
            insertion = l2r_loss(p, cfg, features, tokens)
        elif prior is Prior.BBT:
            generation = int(rng.integers(0, len(bbt_generations(len(tokens))) + 1))
            insertion = bbt_slot_loss(p, cfg, features, tokens, generation)
        else:
            raise ValueError(f"unsupported training prior {prior}")
        ctc_logits = insertion.ctc_logits
    if alpha > 0.0 and ctc_logits is None:
        if cfg.variant is Variant.KERMIT:
            ctc_logits = kermit_forward(p, cfg, features, ()).ctc_logits
        else:
            ctc_logits = ctc_logits_from(p, encode(p, cfg, features))
    log_probs = ad.log_softmax(ctc_logits, axis=1) if alpha > 0.0 else None
    return joint_loss(insertion, log_probs, tokens, alpha)


# -- sequence scores for enumeration checks -------------------------------------


def trace_log_prob(p: ParameterStore, cfg: ModelConfig, features: np.ndarray, tokens,
                   order: InsertionOrder) -> float:
    """log p(sequence under one insertion order): sum over steps of
    log p(token | slot) + log p(slot) against the sorted prefix."""
    if cfg.variant not in (Variant.INSERTION_TRANSFORMER, Variant.KERMIT):
        raise ValueError("trace scores need a slot-scoring variant")
    trace = apply_order(tokens, order)
    enc = encode(p, cfg, features) if cfg.variant is Variant.INSERTION_TRANSFORMER else None
    total = 0.0
    canvas: tuple[int, ...] = ()
    for (token, gap), prefix in zip(trace.steps, trace.prefixes):
        word_logits, pos_scores, _ = _slot_pass(p, cfg, features, enc, canvas)
        word_lp = ad.log_softmax(word_logits, axis=1).value[gap, token]
        pos_lp = ad.log_softmax(ad.transpose(pos_scores), axis=1).value[0, gap]
        total += float(word_lp + pos_lp)
        canvas = prefix
    return total
