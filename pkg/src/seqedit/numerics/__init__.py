"""Tensor math, autodiff, layers, optimizer and checkpoint IO."""

from . import checkpoint, functional
from .layers import (
    DecoderBlock,
    Embedding,
    EncoderBlock,
    FeedForward,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    multi_head_attention,
)
from .optim import Adam, warmup_lr
from .tensor import ShapeError, Tensor, concat, matmul, no_grad, stack, where

__all__ = [
    "Adam",
    "DecoderBlock",
    "Embedding",
    "EncoderBlock",
    "FeedForward",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiHeadAttention",
    "Parameter",
    "ShapeError",
    "Tensor",
    "checkpoint",
    "concat",
    "functional",
    "matmul",
    "multi_head_attention",
    "no_grad",
    "stack",
    "warmup_lr",
    "where",
]
