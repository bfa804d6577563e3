"""Hot dynamic-programming kernels: CTC lattice and Levenshtein alignment.

Each kernel has two implementations: a numba ``@njit`` version and a pure
numpy fallback. The njit path is used when numba imports cleanly and the
environment variable ``INSERTION_ASR_NO_NUMBA`` is unset/empty; setting it to
any non-empty value forces the numpy path. ``benchmarks/kernel_bench.py``
compares the two.

Log-domain negative infinity is represented by the sentinel ``NEG_INF``
(values below ``NEG_THRESHOLD`` are treated as impossible), so arrays stay
finite throughout.
"""

import os

import numpy as np

NEG_INF = -1.0e30
NEG_THRESHOLD = -1.0e29

USE_NUMBA = not os.environ.get("INSERTION_ASR_NO_NUMBA")
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
        USE_NUMBA = False

# ---------------------------------------------------------------------------
# CTC forward lattice
# ---------------------------------------------------------------------------


def extend_with_blanks(targets: np.ndarray, blank: int) -> np.ndarray:
    """Interleave blanks around targets: (y1, y2) -> (b, y1, b, y2, b)."""
    ext = np.full(2 * len(targets) + 1, blank, dtype=np.int64)
    ext[1::2] = targets
    return ext


def _ctc_forward_numpy(log_probs: np.ndarray, ext: np.ndarray) -> float:
    T = log_probs.shape[0]
    W = ext.shape[0]
    # emissions[s, t] = log_probs[t, ext[s]]
    emis = log_probs[:, ext].T
    skip_ok = np.zeros(W, dtype=bool)
    skip_ok[2:] = ext[2:] != ext[:-2]
    alpha = np.full(W, NEG_INF)
    alpha[0] = emis[0, 0]
    if W > 1:
        alpha[1] = emis[1, 0]
    for t in range(1, T):
        stay = alpha
        prev = np.concatenate(([NEG_INF], alpha[:-1]))
        skip = np.concatenate(([NEG_INF, NEG_INF], alpha[:-2]))
        skip = np.where(skip_ok, skip, NEG_INF)
        alpha = np.logaddexp(np.logaddexp(stay, prev), skip) + emis[:, t]
    tail = alpha[W - 1] if W == 1 else np.logaddexp(alpha[W - 1], alpha[W - 2])
    return float(tail)


if USE_NUMBA:

    @njit(fastmath=False)
    def _logaddexp2(a, b):
        if a < b:
            a, b = b, a
        return a + np.log1p(np.exp(b - a))

    @njit(fastmath=False)
    def _ctc_forward_njit(log_probs, ext):
        T = log_probs.shape[0]
        W = ext.shape[0]
        alpha = np.full(W, NEG_INF)
        alpha[0] = log_probs[0, ext[0]]
        if W > 1:
            alpha[1] = log_probs[0, ext[1]]
        nxt = np.empty(W)
        for t in range(1, T):
            for s in range(W):
                acc = alpha[s]
                if s >= 1:
                    acc = _logaddexp2(acc, alpha[s - 1])
                if s >= 2 and ext[s] != ext[s - 2]:
                    acc = _logaddexp2(acc, alpha[s - 2])
                nxt[s] = acc + log_probs[t, ext[s]]
            alpha, nxt = nxt, alpha
        if W == 1:
            return alpha[0]
        return _logaddexp2(alpha[W - 1], alpha[W - 2])


def ctc_forward(log_probs: np.ndarray, ext: np.ndarray) -> float:
    """Forward-lattice log-likelihood over the blank-extended target ``ext``.

    ``log_probs`` is (T, n_labels) with log-normalized rows. Returns the
    sentinel-domain value; callers map values below ``NEG_THRESHOLD`` to -inf.
    """
    if USE_NUMBA:
        return float(_ctc_forward_njit(log_probs, ext))
    return _ctc_forward_numpy(log_probs, ext)


# ---------------------------------------------------------------------------
# Levenshtein alignment counts
# ---------------------------------------------------------------------------
#
# Costs: substitution/deletion/insertion all 1. Among minimum-cost alignments
# the reported split prefers substitutions over deletions over insertions
# (op codes: 0 diagonal match, 1 substitution, 2 deletion, 3 insertion).


def _edit_ops_numpy(ref: np.ndarray, hyp: np.ndarray):
    n, m = len(ref), len(hyp)
    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    op = np.zeros((n + 1, m + 1), dtype=np.int8)
    dist[0, :] = np.arange(m + 1)
    dist[:, 0] = np.arange(n + 1)
    op[0, 1:] = 3
    op[1:, 0] = 2
    steps = np.arange(1, m + 1)
    for i in range(1, n + 1):
        prev = dist[i - 1]
        same = ref[i - 1] == hyp
        sub = prev[:-1] + np.where(same, 0, 1)
        dele = prev[1:] + 1
        c = np.minimum(sub, dele)
        # row[j] = min(c[j], row[j-1] + 1) resolved as a prefix scan
        seed = np.concatenate(([i], c - steps))
        row = np.minimum.accumulate(seed)[1:] + steps
        dist[i, 1:] = row
        ins = np.concatenate(([i], row[:-1])) + 1
        op[i, 1:] = np.select(
            [(row == sub) & same, row == sub, row == dele, row == ins],
            [0, 1, 2, 3],
        )
    return dist, op


if USE_NUMBA:

    @njit
    def _edit_ops_njit(ref, hyp):
        n, m = len(ref), len(hyp)
        dist = np.zeros((n + 1, m + 1), dtype=np.int64)
        op = np.zeros((n + 1, m + 1), dtype=np.int8)
        for j in range(1, m + 1):
            dist[0, j] = j
            op[0, j] = 3
        for i in range(1, n + 1):
            dist[i, 0] = i
            op[i, 0] = 2
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                same = ref[i - 1] == hyp[j - 1]
                sub = dist[i - 1, j - 1] + (0 if same else 1)
                dele = dist[i - 1, j] + 1
                ins = dist[i, j - 1] + 1
                best = min(sub, dele, ins)
                dist[i, j] = best
                if best == sub:
                    op[i, j] = 0 if same else 1
                elif best == dele:
                    op[i, j] = 2
                else:
                    op[i, j] = 3
        return dist, op


def edit_counts(ref, hyp) -> tuple[int, int, int]:
    """(substitutions, deletions, insertions) of a minimum-cost alignment."""
    r = np.asarray(ref, dtype=np.int64)
    h = np.asarray(hyp, dtype=np.int64)
    if USE_NUMBA:
        dist, op = _edit_ops_njit(r, h)
    else:
        dist, op = _edit_ops_numpy(r, h)
    i, j = len(r), len(h)
    s = d = ins = 0
    while i > 0 or j > 0:
        o = op[i, j]
        if o == 0:
            i -= 1
            j -= 1
        elif o == 1:
            s += 1
            i -= 1
            j -= 1
        elif o == 2:
            d += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    assert s + d + ins == dist[len(r), len(h)]
    return s, d, ins
