"""CTC: collapse map, exact lattice likelihood, brute-force oracle, decoding,
and a tape-differentiated loss.

Posterior layout: a (T, n_labels) matrix of log-probabilities whose columns
are the content-token ids followed by blank in the last column (pass
``blank`` to override). All lattice math runs in the log domain; impossible
paths carry the large-negative sentinel from :mod:`insertion_asr.kernels`
and only the public boundary converts to -inf.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .kernels import NEG_INF, NEG_THRESHOLD, ctc_forward, extend_with_blanks

ROW_NORM_TOL = 1e-9


class CtcInfeasibleError(Exception):
    """Target cannot be aligned: too few frames. Training skips the CTC term."""


@dataclass(frozen=True)
class AlignmentPosterior:
    """Per-frame log-probabilities over content tokens plus blank."""

    log_probs: np.ndarray

    def __post_init__(self):
        lp = np.asarray(self.log_probs, dtype=np.float64)
        object.__setattr__(self, "log_probs", lp)
        if lp.ndim != 2 or lp.shape[0] < 1:
            raise ValueError(f"posterior must be (T>=1, labels), got {lp.shape}")
        _check_rows_normalized(lp)

    @property
    def n_frames(self) -> int:
        return self.log_probs.shape[0]

    @property
    def n_labels(self) -> int:
        return self.log_probs.shape[1]


def _check_rows_normalized(log_probs: np.ndarray) -> None:
    mass = np.exp(log_probs).sum(axis=1)
    if np.abs(mass - 1.0).max() > ROW_NORM_TOL:
        raise ValueError("posterior rows are not log-normalized")


def _blank_col(log_probs: np.ndarray, blank: int | None) -> int:
    return log_probs.shape[1] - 1 if blank is None else blank


def collapse(alignment, blank: int) -> tuple[int, ...]:
    """Squeeze consecutive repeats, then drop blanks."""
    out = []
    prev = None
    for a in alignment:
        if a != prev:
            out.append(a)
        prev = a
    return tuple(a for a in out if a != blank)


def min_alignment_frames(targets) -> int:
    """Shortest alignment: one frame per token plus one blank per repeat pair."""
    targets = tuple(targets)
    repeats = sum(1 for a, b in zip(targets, targets[1:]) if a == b)
    return len(targets) + repeats


def _validate_targets(targets, n_labels: int, blank: int) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    for t in targets:
        if t == blank or not 0 <= t < n_labels:
            raise ValueError(f"target id {t} outside the content label range")
    return targets


def ctc_log_likelihood(posterior: AlignmentPosterior, targets, blank: int | None = None) -> float:
    """log P(targets | posterior), summing all alignments that collapse to it."""
    lp = posterior.log_probs
    blank = _blank_col(lp, blank)
    targets = _validate_targets(targets, lp.shape[1], blank)
    if lp.shape[0] < min_alignment_frames(targets):
        return float("-inf")
    ext = extend_with_blanks(np.asarray(targets, dtype=np.int64), blank)
    ll = ctc_forward(lp, ext)
    return float("-inf") if ll < NEG_THRESHOLD else ll


BRUTE_FORCE_MAX_FRAMES = 8
BRUTE_FORCE_MAX_LABELS = 4


def ctc_brute_force(posterior: AlignmentPosterior, targets, blank: int | None = None) -> float:
    """Oracle: enumerate every alignment and sum the ones collapsing to targets."""
    lp = posterior.log_probs
    T, L = lp.shape
    if T > BRUTE_FORCE_MAX_FRAMES or L > BRUTE_FORCE_MAX_LABELS:
        raise ValueError(f"instance above enumeration bound: T={T}, labels={L}")
    blank = _blank_col(lp, blank)
    targets = _validate_targets(targets, L, blank)
    terms = []
    for alignment in itertools.product(range(L), repeat=T):
        if collapse(alignment, blank) == targets:
            terms.append(sum(lp[t, a] for t, a in enumerate(alignment)))
    if not terms:
        return float("-inf")
    terms = np.asarray(terms)
    m = terms.max()
    return float(m + np.log(np.exp(terms - m).sum()))


def ctc_greedy_decode(posterior: AlignmentPosterior, blank: int | None = None) -> tuple[int, ...]:
    """Per-frame argmax (ties to the lowest id), then collapse."""
    lp = posterior.log_probs
    blank = _blank_col(lp, blank)
    return collapse(np.argmax(lp, axis=1), blank)


# ---------------------------------------------------------------------------
# Differentiable lattice
# ---------------------------------------------------------------------------


def ctc_loss_node(log_probs: ad.Tensor, targets, blank: int | None = None) -> ad.Tensor:
    """Negative lattice log-likelihood as a graph node over log-prob rows.

    The gradient comes from differentiating this forward recursion through
    the tape; raises :class:`CtcInfeasibleError` for unalignable targets.
    """
    T, L = log_probs.value.shape
    blank = L - 1 if blank is None else blank
    targets = _validate_targets(targets, L, blank)
    if T < min_alignment_frames(targets):
        raise CtcInfeasibleError(f"{T} frames cannot align {len(targets)} tokens")
    ext = extend_with_blanks(np.asarray(targets, dtype=np.int64), blank)
    W = len(ext)
    emis = ad.gather_rows(ad.transpose(log_probs), ext)  # (W, T)
    unreachable0 = np.arange(W)[:, None] >= 2
    alpha = ad.masked_fill(ad.narrow(emis, 1, 0, 1), unreachable0, NEG_INF)
    if W >= 3:
        no_skip = np.concatenate(([True, True], ext[2:] == ext[:-2]))[:, None]
    else:
        no_skip = np.ones((W, 1), dtype=bool)
    pad1 = ad.constant(np.full((1, 1), NEG_INF))
    pad2 = ad.constant(np.full((min(2, W), 1), NEG_INF))
    for t in range(1, T):
        shift1 = ad.concat([pad1, ad.narrow(alpha, 0, 0, W - 1)], axis=0)
        acc = ad.logaddexp(alpha, shift1)
        if W > 2:
            shift2 = ad.concat([pad2, ad.narrow(alpha, 0, 0, W - 2)], axis=0)
            acc = ad.logaddexp(acc, ad.masked_fill(shift2, no_skip, NEG_INF))
        alpha = ad.add(acc, ad.narrow(emis, 1, t, 1))
    if W == 1:
        tail = alpha
    else:
        tail = ad.logaddexp(ad.narrow(alpha, 0, W - 1, 1), ad.narrow(alpha, 0, W - 2, 1))
    return ad.mul(ad.total(tail), -1.0)


def ctc_loss_and_grad(logits: np.ndarray, targets, blank: int | None = None) -> tuple[float, np.ndarray]:
    """Loss and d(loss)/d(logits) for unnormalized per-frame scores."""
    leaf = ad.constant(np.asarray(logits, dtype=np.float64))
    loss = ctc_loss_node(ad.log_softmax(leaf, axis=1), targets, blank)
    ad.backward(loss)
    return loss.item(), leaf.grad
