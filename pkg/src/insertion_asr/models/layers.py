"""Transformer building blocks on the autodiff tape.

Pre-norm residual blocks, multi-head attention with optional boolean masks
and optional three-class relative-position score biases, and a tanh
feed-forward. Parameter creation and the forward pass are separate passes
over the same name scheme.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..params import ParameterStore

MASK_FILL = -1e9


def sinusoid_positions(n: int, dim: int) -> np.ndarray:
    """Standard sin/cos position signal, rows are positions."""
    pos = np.arange(n, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * (idx // 2) / dim)
    out = np.where(idx % 2 == 0, np.sin(angle), np.cos(angle))
    return out


def stack_frames(features: np.ndarray, stack: int) -> np.ndarray:
    """(T, d) -> (ceil(T/stack), d*stack); an odd tail repeats the last frame."""
    features = np.asarray(features, dtype=np.float64)
    T, d = features.shape
    if stack == 1:
        return features
    rem = (-T) % stack
    if rem:
        features = np.concatenate([features, np.repeat(features[-1:], rem, axis=0)], axis=0)
    return features.reshape(-1, stack * d)


# -- parameter creation -------------------------------------------------------


def add_linear(store: ParameterStore, name: str, d_in: int, d_out: int, rng, bias=True):
    store.create(f"{name}.w", (d_in, d_out), rng)
    if bias:
        store.create(f"{name}.b", (1, d_out), rng, kind="zero")


def add_layer_norm(store: ParameterStore, name: str, dim: int, rng):
    store.create(f"{name}.g", (1, dim), rng, kind="one")
    store.create(f"{name}.b", (1, dim), rng, kind="zero")


def add_attention(store: ParameterStore, name: str, dim: int, heads: int, rng, relative=False):
    for proj in ("wq", "wk", "wv", "wo"):
        store.create(f"{name}.{proj}", (dim, dim), rng)
    if relative:
        store.create(f"{name}.rel", (heads, 3), rng, kind="zero")


def add_block(store: ParameterStore, name: str, dim: int, heads: int, ffn_dim: int, rng,
              cross=False, relative=False):
    add_layer_norm(store, f"{name}.ln1", dim, rng)
    add_attention(store, f"{name}.sa", dim, heads, rng, relative=relative)
    if cross:
        add_layer_norm(store, f"{name}.ln_x", dim, rng)
        add_attention(store, f"{name}.ca", dim, heads, rng)
    add_layer_norm(store, f"{name}.ln2", dim, rng)
    add_linear(store, f"{name}.ffn.fc1", dim, ffn_dim, rng)
    add_linear(store, f"{name}.ffn.fc2", ffn_dim, dim, rng)


# -- forward ------------------------------------------------------------------


def linear(p: ParameterStore, name: str, x: ad.Tensor) -> ad.Tensor:
    out = ad.matmul(x, p[f"{name}.w"])
    if f"{name}.b" in p:
        out = ad.add(out, p[f"{name}.b"])
    return out


def layer_norm(p: ParameterStore, name: str, x: ad.Tensor) -> ad.Tensor:
    return ad.layer_norm(x, p[f"{name}.g"], p[f"{name}.b"])


def attention(p: ParameterStore, name: str, q_in: ad.Tensor, kv_in: ad.Tensor, heads: int,
              mask: np.ndarray | None = None, relations: np.ndarray | None = None) -> ad.Tensor:
    """Multi-head scaled dot-product attention.

    ``mask`` is boolean (Lq, Lk), True = blocked. ``relations`` is an integer
    (Lq, Lk) matrix in {-1, 0, +1}; each head adds a learned scalar score bias
    per relation class (the relative-position encoding).
    """
    dim = q_in.value.shape[1]
    dh = dim // heads
    scale = dh**-0.5
    q = ad.matmul(q_in, p[f"{name}.wq"])
    k = ad.matmul(kv_in, p[f"{name}.wk"])
    v = ad.matmul(kv_in, p[f"{name}.wv"])
    class_masks = None
    if relations is not None:
        class_masks = [ad.constant((relations == r).astype(np.float64)) for r in (-1, 0, 1)]
        rel_param = p[f"{name}.rel"]
    heads_out = []
    for h in range(heads):
        qh = ad.narrow(q, 1, h * dh, dh)
        kh = ad.narrow(k, 1, h * dh, dh)
        vh = ad.narrow(v, 1, h * dh, dh)
        scores = ad.mul(ad.matmul(qh, ad.transpose(kh)), scale)
        if class_masks is not None:
            for r, cmask in enumerate(class_masks):
                bias = ad.narrow(ad.narrow(rel_param, 0, h, 1), 1, r, 1)
                scores = ad.add(scores, ad.mul(cmask, bias))
        if mask is not None:
            scores = ad.masked_fill(scores, mask, MASK_FILL)
        weights = ad.softmax(scores, axis=1)
        heads_out.append(ad.matmul(weights, vh))
    return ad.matmul(ad.concat(heads_out, axis=1), p[f"{name}.wo"])


def feed_forward(p: ParameterStore, name: str, x: ad.Tensor) -> ad.Tensor:
    return linear(p, f"{name}.fc2", ad.tanh(linear(p, f"{name}.fc1", x)))


def block(p: ParameterStore, name: str, x: ad.Tensor, heads: int,
          memory: ad.Tensor | None = None,
          self_mask: np.ndarray | None = None,
          relations: np.ndarray | None = None) -> ad.Tensor:
    normed = layer_norm(p, f"{name}.ln1", x)
    h = attention(p, f"{name}.sa", normed, normed, heads, mask=self_mask, relations=relations)
    x = ad.add(x, h)
    if memory is not None:
        h = attention(p, f"{name}.ca", layer_norm(p, f"{name}.ln_x", x), memory, heads)
        x = ad.add(x, h)
    x = ad.add(x, feed_forward(p, f"{name}.ffn", layer_norm(p, f"{name}.ln2", x)))
    return x
