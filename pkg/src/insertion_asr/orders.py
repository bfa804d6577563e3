"""Insertion orders: priors over generation order and their trace semantics.

An order for an N-token sequence is a permutation of the surface indices
1..N; entry n names the surface position inserted at step n. Three priors are
supported: left-to-right, balanced-binary (centermost-first, enabling
~log2(N)-iteration parallel decoding), and uniform over all permutations (the
last powers small-N marginalization checks and is an extension beyond the two
deterministic priors).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Prior(enum.Enum):
    L2R = "l2r"
    BBT = "bbt"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class InsertionOrder:
    ranks: tuple[int, ...]
    prior: Prior

    def __post_init__(self):
        n = len(self.ranks)
        if sorted(self.ranks) != list(range(1, n + 1)):
            raise ValueError(f"ranks must be a permutation of 1..{n}: {self.ranks}")

    def __len__(self) -> int:
        return len(self.ranks)


@dataclass(frozen=True)
class InsertionTrace:
    """Per-step (token, slot) pairs plus the sorted prefix after each step."""

    steps: tuple[tuple[int, int], ...]
    prefixes: tuple[tuple[int, ...], ...]


def order_l2r(n: int) -> InsertionOrder:
    return InsertionOrder(tuple(range(1, n + 1)), Prior.L2R)


def _bbt_pick(lo: int, hi: int, center: float) -> int:
    """Centermost index of the span lo..hi; even spans round toward ``center``,
    exact ties break left."""
    if (hi - lo) % 2 == 0:
        return (lo + hi) // 2
    left = (lo + hi - 1) // 2
    right = left + 1
    if abs(right - center) < abs(left - center):
        return right
    return left


def bbt_generations(n: int) -> list[list[int]]:
    """Surface indices inserted at each parallel generation, left to right."""
    if n == 0:
        return []
    center = (1 + n) / 2.0
    generations = []
    spans = [(1, n)]
    while spans:
        picks = []
        nxt = []
        for lo, hi in spans:
            mid = _bbt_pick(lo, hi, center)
            picks.append(mid)
            if lo <= mid - 1:
                nxt.append((lo, mid - 1))
            if mid + 1 <= hi:
                nxt.append((mid + 1, hi))
        generations.append(sorted(picks))
        spans = nxt
    return generations


def order_bbt(n: int) -> InsertionOrder:
    ranks = tuple(i for gen in bbt_generations(n) for i in gen)
    return InsertionOrder(ranks, Prior.BBT)


def sample_order(prior: Prior, n: int, rng: np.random.Generator) -> InsertionOrder:
    if prior is Prior.L2R:
        return order_l2r(n)
    if prior is Prior.BBT:
        return order_bbt(n)
    return InsertionOrder(tuple(int(i) + 1 for i in rng.permutation(n)), Prior.UNIFORM)


def apply_order(tokens, order: InsertionOrder) -> InsertionTrace:
    """Turn a sequence plus an order into the per-step insertion trace.

    The slot at step n is the gap index against the sorted prefix of the
    n-1 previously inserted tokens.
    """
    tokens = tuple(tokens)
    if len(tokens) != len(order):
        raise ValueError(f"sequence length {len(tokens)} != order length {len(order)}")
    inserted: list[int] = []
    steps = []
    prefixes = []
    for z in order.ranks:
        slot = sum(1 for s in inserted if s < z)
        inserted.append(z)
        inserted.sort()
        steps.append((tokens[z - 1], slot))
        prefixes.append(tuple(tokens[s - 1] for s in inserted))
    return InsertionTrace(tuple(steps), tuple(prefixes))


def relpos_matrix(order: InsertionOrder, n: int) -> np.ndarray:
    """Pairwise surface-order signs of the first n inserted tokens.

    Entry (i, j) is +1 when token j sits left of token i, -1 when right,
    0 on the diagonal; rows/columns follow insertion order.
    """
    if not 1 <= n <= len(order):
        raise ValueError(f"step {n} out of range for order of length {len(order)}")
    z = np.asarray(order.ranks[:n], dtype=np.int64)
    return np.sign(z[:, None] - z[None, :]).astype(np.int64)
