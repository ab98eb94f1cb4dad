"""Differentiable building blocks with hand-written backward rules."""

from __future__ import annotations

import math

import numpy as np

from .tensor import ShapeError, Tensor, as_tensor, matmul

_GELU_C = math.sqrt(2.0 / math.pi)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._make(out, (x,), backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    sm = np.exp(out)

    def backward(g):
        return (g - sm * g.sum(axis=axis, keepdims=True),)

    return Tensor._make(out, (x,), backward, "log_softmax")


def logsumexp(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    m = x.data.max(axis=axis, keepdims=True)
    s = np.exp(x.data - m).sum(axis=axis, keepdims=True)
    out = (np.log(s) + m).squeeze(axis)
    sm = np.exp(x.data - m) / s

    def backward(g):
        return (np.expand_dims(g, axis) * sm,)

    return Tensor._make(out, (x,), backward, "logsumexp")


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    x = as_tensor(x)
    a = x.data
    inner = _GELU_C * (a + 0.044715 * a**3)
    t = np.tanh(inner)
    out = 0.5 * a * (1.0 + t)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * a * a)
        return (g * (0.5 * (1.0 + t) + 0.5 * a * (1.0 - t * t) * dinner),)

    return Tensor._make(out, (x,), backward, "gelu")


def layer_norm(x: Tensor, weight: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply the affine map."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    d = x.shape[-1]
    if weight.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: features {x.shape} vs affine {weight.shape}/{bias.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    w = weight.data
    out = xhat * w + bias.data

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        gw = (g * xhat).sum(axis=lead)
        gb = g.sum(axis=lead)
        gx_hat = g * w
        gx = inv * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, gw, gb

    return Tensor._make(out, (x, weight, bias), backward, "layer_norm")


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``weight[ids]``; ``ids`` is an integer array."""
    weight = as_tensor(weight)
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError(f"embedding: ids must be integers, got {ids.dtype}")
    vocab = weight.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        raise ShapeError(f"embedding: token id out of range for table of size {vocab}")
    w_shape = weight.shape

    def backward(g):
        out = np.zeros(w_shape, dtype=g.dtype)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, w_shape[1]))
        return (out,)

    return Tensor._make(weight.data[ids], (weight,), backward, "embedding")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` stored as [in, out]."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {weight.shape}")
    y = matmul(x, weight)
    if bias is not None:
        y = y + bias
    return y


def masked_mean_pool(x: Tensor, mask: np.ndarray) -> Tensor:
    """Mean over axis -2 restricted to positions where ``mask`` is true.

    x: [..., L, D]; mask: [..., L].
    """
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=x.dtype)
    if mask.shape != x.shape[:-1]:
        raise ShapeError(f"masked_mean_pool: features {x.shape} vs mask {mask.shape}")
    count = mask.sum(axis=-1, keepdims=True)
    if np.any(count == 0):
        raise ValueError("masked_mean_pool: empty mask row")
    wts = (mask / count)[..., None]
    out = (x.data * wts).sum(axis=-2)

    def backward(g):
        return (g[..., None, :] * wts,)

    return Tensor._make(out, (x,), backward, "masked_mean_pool")


def l2_normalize(x: Tensor, axis: int = -1, eps: float = 1e-12) -> Tensor:
    x = as_tensor(x)
    norm = np.sqrt((x.data * x.data).sum(axis=axis, keepdims=True))
    norm = np.maximum(norm, eps)
    out = x.data / norm

    def backward(g):
        return ((g - out * (g * out).sum(axis=axis, keepdims=True)) / norm,)

    return Tensor._make(out, (x,), backward, "l2_normalize")


def cross_entropy_soft(logits: Tensor, targets: np.ndarray, weights: np.ndarray | None = None) -> Tensor:
    """Weighted mean of ``-sum_c targets[c] * log_softmax(logits)[c]``.

    logits: [..., C]; targets: same shape (a distribution per row);
    weights: [...] per-row weights, default all ones. Normalized by the sum
    of weights.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=logits.dtype)
    if targets.shape != logits.shape:
        raise ShapeError(f"cross_entropy_soft: logits {logits.shape} vs targets {targets.shape}")
    if weights is None:
        weights = np.ones(logits.shape[:-1], dtype=logits.dtype)
    weights = np.asarray(weights, dtype=logits.dtype)
    total = weights.sum()
    if total <= 0:
        raise ValueError("cross_entropy_soft: weights sum to zero")
    logp = log_softmax(logits, axis=-1)
    row = -(logp * targets).sum(axis=-1)
    return (row * weights).sum() * (1.0 / total)


def one_hot(ids: np.ndarray, num_classes: int, dtype=np.float64) -> np.ndarray:
    ids = np.asarray(ids)
    out = np.zeros(ids.shape + (num_classes,), dtype=dtype)
    np.put_along_axis(out, ids[..., None], 1.0, axis=-1)
    return out


def smooth_labels(ids: np.ndarray, num_classes: int, eps: float, dtype=np.float64) -> np.ndarray:
    """One-hot targets mixed with the uniform distribution at weight ``eps``."""
    return one_hot(ids, num_classes, dtype) * (1.0 - eps) + eps / num_classes
