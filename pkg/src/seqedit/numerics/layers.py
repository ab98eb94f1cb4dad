"""Parameter containers and transformer layers built on the tensor tape."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import functional as F
from .tensor import ShapeError, Tensor

NEG_INF = -1e9


class Parameter(Tensor):
    """A leaf tensor owned by a module."""

    def __init__(self, data, requires_grad: bool = True):
        super().__init__(data, requires_grad=requires_grad)


class Module:
    """Minimal module: parameters are attributes, submodules may sit in lists."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = "") -> None:
        for name, p in self.named_parameters():
            key = prefix + name
            if key not in state:
                raise KeyError(f"missing parameter {key!r} in state")
            arr = np.asarray(state[key])
            if arr.shape != p.shape:
                raise ShapeError(f"parameter {key!r}: expected {p.shape}, got {arr.shape}")
            p.data = arr.astype(p.dtype, copy=True)

    def requires_grad_(self, flag: bool) -> "Module":
        for p in self.parameters():
            p.requires_grad = flag
            if not flag:
                p.grad = None
        return self

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def cast(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self


def uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int, dtype) -> Parameter:
    bound = 1.0 / math.sqrt(fan_in)
    return Parameter(rng.uniform(-bound, bound, size=shape).astype(dtype))


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dtype=np.float32, bias: bool = True):
        self.weight = uniform_init(rng, (d_in, d_out), d_in, dtype)
        self.bias = Parameter(np.zeros(d_out, dtype=dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, dtype=np.float32):
        self.weight = Parameter(np.ones(d, dtype=dtype))
        self.bias = Parameter(np.zeros(d, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.weight, self.bias)


class Embedding(Module):
    def __init__(self, n: int, d: int, rng: np.random.Generator, dtype=np.float32):
        self.weight = uniform_init(rng, (n, d), d, dtype)

    def __call__(self, ids: np.ndarray) -> Tensor:
        return F.embedding(self.weight, ids)


def attention_bias(
    q_len: int,
    k_len: int,
    key_mask: np.ndarray | None = None,
    causal: bool = False,
    dtype=np.float32,
) -> np.ndarray | None:
    """Additive mask broadcastable to [B, H, Lq, Lk]; None when nothing is masked."""
    bias = None
    if causal:
        tri = np.triu(np.ones((q_len, k_len), dtype=bool), k=1)
        bias = np.where(tri, NEG_INF, 0.0).astype(dtype)[None, None]
    if key_mask is not None:
        km = np.where(np.asarray(key_mask, dtype=bool), 0.0, NEG_INF).astype(dtype)[:, None, None, :]
        bias = km if bias is None else bias + km
    return bias


class MultiHeadAttention(Module):
    def __init__(self, d: int, heads: int, rng: np.random.Generator, dtype=np.float32):
        if d % heads:
            raise ValueError(f"model dim {d} not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(d, d, rng, dtype)
        self.k = Linear(d, d, rng, dtype)
        self.v = Linear(d, d, rng, dtype)
        self.o = Linear(d, d, rng, dtype)

    def __call__(self, x_q, x_kv, key_mask=None, causal=False, return_weights=False):
        return multi_head_attention(
            x_q, x_kv, self, self.heads, key_mask=key_mask, causal=causal, return_weights=return_weights
        )


def multi_head_attention(
    x_q: Tensor,
    x_kv: Tensor,
    proj: MultiHeadAttention,
    heads: int,
    key_mask: np.ndarray | None = None,
    causal: bool = False,
    return_weights: bool = False,
):
    """Scaled dot-product attention over [B, L, D] inputs.

    ``key_mask`` ([B, Lk], true = attend) and ``causal`` both translate to an
    additive bias; masked keys get exactly zero weight after the softmax.
    """
    b, lq, d = x_q.shape
    lk = x_kv.shape[1]
    if d % heads:
        raise ValueError(f"model dim {d} not divisible by {heads} heads")
    dh = d // heads

    def split(t: Tensor, n: int) -> Tensor:
        return t.reshape(b, n, heads, dh).transpose(0, 2, 1, 3)

    q = split(proj.q(x_q), lq)
    k = split(proj.k(x_kv), lk)
    v = split(proj.v(x_kv), lk)
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(dh))
    bias = attention_bias(lq, lk, key_mask, causal, dtype=scores.dtype)
    if bias is not None:
        scores = scores + bias
    weights = F.softmax(scores, axis=-1)
    ctx = (weights @ v).transpose(0, 2, 1, 3).reshape(b, lq, d)
    out = proj.o(ctx)
    if return_weights:
        return out, weights
    return out


class FeedForward(Module):
    def __init__(self, d: int, hidden: int, rng: np.random.Generator, dtype=np.float32):
        self.fc1 = Linear(d, hidden, rng, dtype)
        self.fc2 = Linear(hidden, d, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(F.gelu(self.fc1(x)))


class EncoderBlock(Module):
    """Pre-norm bidirectional transformer block."""

    def __init__(self, d: int, heads: int, rng: np.random.Generator, dtype=np.float32):
        self.ln1 = LayerNorm(d, dtype)
        self.attn = MultiHeadAttention(d, heads, rng, dtype)
        self.ln2 = LayerNorm(d, dtype)
        self.ff = FeedForward(d, 4 * d, rng, dtype)

    def __call__(self, x: Tensor, mask: np.ndarray) -> Tensor:
        h = self.ln1(x)
        x = x + self.attn(h, h, key_mask=mask)
        return x + self.ff(self.ln2(x))


class DecoderBlock(Module):
    """Pre-norm causal self-attention, cross-attention over a memory, then MLP."""

    def __init__(self, d: int, heads: int, rng: np.random.Generator, dtype=np.float32):
        self.ln1 = LayerNorm(d, dtype)
        self.self_attn = MultiHeadAttention(d, heads, rng, dtype)
        self.ln2 = LayerNorm(d, dtype)
        self.cross_attn = MultiHeadAttention(d, heads, rng, dtype)
        self.ln3 = LayerNorm(d, dtype)
        self.ff = FeedForward(d, 4 * d, rng, dtype)

    def __call__(self, x: Tensor, memory: Tensor, memory_mask: np.ndarray | None) -> Tensor:
        h = self.ln1(x)
        x = x + self.self_attn(h, h, causal=True)
        x = x + self.cross_attn(self.ln2(x), memory, key_mask=memory_mask)
        return x + self.ff(self.ln3(x))
