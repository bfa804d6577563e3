"""Reverse-mode automatic differentiation over dense float64 arrays.

Values are computed eagerly as the expression graph is built; each node keeps
its parents and a backward closure, and ``backward`` replays the tape in
reverse topological order. Every primitive validates that its result is
finite, so NaN/Inf surface as errors at the op that produced them instead of
propagating. Large-negative sentinels (see ``kernels.NEG_INF``) stand in for
log-domain zeros.

The primitive set is the minimal closure over the toy transformer models in
this package: matmul, broadcasting add/sub/mul, transpose, narrow/concat
along one axis, exp/log/tanh, softmax/log-softmax, logsumexp/logaddexp,
sum/mean, layer normalization, row gather (embeddings), and masked fill.
"""

from __future__ import annotations

import numpy as np


class NonFiniteError(ArithmeticError):
    """A primitive produced NaN or Inf, or a gradient did."""


def _check_finite(value: np.ndarray, what: str) -> None:
    if not np.isfinite(value).all():
        raise NonFiniteError(f"non-finite values in {what}")


class Tensor:
    """One node of the expression graph: a value plus how it was computed."""

    __slots__ = ("value", "parents", "grad", "_backward", "name")

    def __init__(self, value, parents=(), backward=None, name=None):
        self.value = value if isinstance(value, np.ndarray) else np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.grad = None
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.value.shape}{tag})"


def constant(value, name=None) -> Tensor:
    arr = np.asarray(value, dtype=np.float64)
    _check_finite(arr, name or "constant")
    return Tensor(arr, name=name)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _make(value: np.ndarray, parents, backward, what: str) -> Tensor:
    _check_finite(value, what)
    return Tensor(value, parents, backward)


def _accum(node: Tensor, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g, dtype=np.float64)
    else:
        node.grad = node.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a gradient back to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.value + b.value

    def back(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))

    return _make(out, (a, b), back, "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.value - b.value

    def back(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(-g, b.value.shape))

    return _make(out, (a, b), back, "sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.value * b.value

    def back(g):
        _accum(a, _unbroadcast(g * b.value, a.value.shape))
        _accum(b, _unbroadcast(g * a.value, b.value.shape))

    return _make(out, (a, b), back, "mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.value.shape} @ {b.value.shape}")
    if a.value.shape[1] != b.value.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.value.shape} @ {b.value.shape}")
    out = a.value @ b.value

    def back(g):
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)

    return _make(out, (a, b), back, "matmul")


def transpose(a: Tensor) -> Tensor:
    def back(g):
        _accum(a, g.T)

    return _make(a.value.T, (a,), back, "transpose")


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice of ``length`` entries from ``start`` along ``axis``."""
    n = a.value.shape[axis]
    if start < 0 or length < 0 or start + length > n:
        raise ValueError(f"narrow [{start}:{start + length}] out of range for axis of size {n}")
    idx = [slice(None)] * a.value.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = a.value[idx]

    def back(g):
        full = np.zeros_like(a.value)
        full[idx] = g
        _accum(a, full)

    return _make(out, (a,), back, "narrow")


def concat(parts, axis: int) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out = np.concatenate([p.value for p in parts], axis=axis)
    sizes = [p.value.shape[axis] for p in parts]

    def back(g):
        offset = 0
        for p, size in zip(parts, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offset, offset + size)
            _accum(p, g[tuple(idx)])
            offset += size

    return _make(out, tuple(parts), back, "concat")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.value)

    def back(g):
        _accum(a, g * out)

    return _make(out, (a,), back, "exp")


def log(a: Tensor) -> Tensor:
    out = np.log(a.value)

    def back(g):
        _accum(a, g / a.value)

    return _make(out, (a,), back, "log")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.value)

    def back(g):
        _accum(a, g * (1.0 - out * out))

    return _make(out, (a,), back, "tanh")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if a.value.shape[axis] == 0:
        raise ValueError("softmax along an empty axis")
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        _accum(a, (g - dot) * out)

    return _make(out, (a,), back, "softmax")


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    if a.value.shape[axis] == 0:
        raise ValueError("log_softmax along an empty axis")
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def back(g):
        soft = np.exp(out)
        _accum(a, g - soft * g.sum(axis=axis, keepdims=True))

    return _make(out, (a,), back, "log_softmax")


def logsumexp(a: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    if a.value.shape[axis] == 0:
        raise ValueError("logsumexp along an empty axis")
    m = a.value.max(axis=axis, keepdims=True)
    red = m + np.log(np.exp(a.value - m).sum(axis=axis, keepdims=True))
    out = red if keepdims else np.squeeze(red, axis=axis)

    def back(g):
        gk = g if keepdims else np.expand_dims(g, axis=axis)
        _accum(a, np.exp(a.value - red) * gk)

    return _make(out, (a,), back, "logsumexp")


def logaddexp(a, b) -> Tensor:
    """Elementwise log(exp(a) + exp(b)); sentinel-safe in the log domain."""
    a, b = _as_tensor(a), _as_tensor(b)
    out = np.logaddexp(a.value, b.value)

    def back(g):
        _accum(a, _unbroadcast(g * np.exp(a.value - out), a.value.shape))
        _accum(b, _unbroadcast(g * np.exp(b.value - out), b.value.shape))

    return _make(out, (a, b), back, "logaddexp")


def total(a: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    out = np.asarray(a.value.sum())

    def back(g):
        _accum(a, np.broadcast_to(g, a.value.shape))

    return _make(out, (a,), back, "sum")


def mean(a: Tensor) -> Tensor:
    if a.value.size == 0:
        raise ValueError("mean of an empty tensor")
    out = np.asarray(a.value.mean())
    inv = 1.0 / a.value.size

    def back(g):
        _accum(a, np.broadcast_to(g * inv, a.value.shape))

    return _make(out, (a,), back, "mean")


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""
    mu = a.value.mean(axis=-1, keepdims=True)
    centered = a.value - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    norm = centered * inv
    out = norm * gain.value + bias.value

    def back(g):
        _accum(gain, _unbroadcast(g * norm, gain.value.shape))
        _accum(bias, _unbroadcast(g, bias.value.shape))
        gn = g * gain.value
        gn_mean = gn.mean(axis=-1, keepdims=True)
        gn_norm_mean = (gn * norm).mean(axis=-1, keepdims=True)
        _accum(a, inv * (gn - gn_mean - norm * gn_norm_mean))

    return _make(out, (a, gain, bias), back, "layer_norm")


def gather_rows(table: Tensor, indices) -> Tensor:
    """Select rows of a 2-D table: the embedding lookup."""
    idx = np.asarray(indices, dtype=np.int64)
    if table.value.ndim != 2:
        raise ValueError("gather_rows expects a 2-D table")
    out = table.value[idx]

    def back(g):
        full = np.zeros_like(table.value)
        np.add.at(full, idx, g)
        _accum(table, full)

    return _make(out, (table,), back, "gather_rows")


def masked_fill(a: Tensor, mask, value: float) -> Tensor:
    """Replace entries where ``mask`` is True by ``value``; their grads are 0."""
    m = np.asarray(mask, dtype=bool)
    out = np.where(m, value, a.value)

    def back(g):
        _accum(a, _unbroadcast(np.where(m, 0.0, g), a.value.shape))

    return _make(out, (a,), back, "masked_fill")


# ---------------------------------------------------------------------------
# Reverse sweep
# ---------------------------------------------------------------------------


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(node) into ``.grad`` over the whole graph."""
    if loss.value.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    order = _topo_order(loss)
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


def gradients(loss: Tensor, parameters: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Fresh gradients of a scalar loss for every named parameter.

    Parameters not reachable from the loss get zero gradients of their shape.
    """
    for p in parameters.values():
        p.grad = None
    backward(loss)
    out = {}
    for name, p in parameters.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.value)
        _check_finite(g, f"gradient of {name}")
        out[name] = g
    return out
