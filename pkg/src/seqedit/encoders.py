"""Protein and biotext transformer encoders with projection heads."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .numerics import functional as F
from .numerics.layers import Embedding, EncoderBlock, LayerNorm, Linear, Module
from .numerics.tensor import ShapeError, Tensor, no_grad
from .tokenize import PROTEIN_VOCAB, TokenizedSeq, trim


@dataclass
class EncoderConfig:
    vocab_size: int = len(PROTEIN_VOCAB)
    layers: int = 4
    model_dim: int = 256
    heads: int = 4
    max_len: int = 1024
    projection_dim: int = 128
    normalize: bool = True

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ValueError(f"model_dim {self.model_dim} must be divisible by heads {self.heads}")
        for name in ("vocab_size", "layers", "model_dim", "heads", "max_len", "projection_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Encoded:
    """Per-token features [B, L, D] and the unit-norm pooled embedding [B, P]."""

    token_features: Tensor
    pooled_embedding: Tensor
    mask: np.ndarray


EncodedProtein = Encoded
EncodedText = Encoded


class TransformerEncoder(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        d = cfg.model_dim
        self.tok = Embedding(cfg.vocab_size, d, rng, dtype)
        self.pos = Embedding(cfg.max_len, d, rng, dtype)
        self.blocks = [EncoderBlock(d, cfg.heads, rng, dtype) for _ in range(cfg.layers)]
        self.ln_f = LayerNorm(d, dtype)
        self.proj = Linear(d, cfg.projection_dim, rng, dtype)

    def _check_ids(self, ids: np.ndarray) -> None:
        ids = np.asarray(ids)
        if ids.ndim != 2:
            raise ShapeError(f"encoder: expected [B, L] ids, got shape {ids.shape}")
        if ids.shape[1] > self.cfg.max_len:
            raise ShapeError(f"encoder: length {ids.shape[1]} exceeds max_len {self.cfg.max_len}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.cfg.vocab_size):
            raise ValueError(f"token id out of range for vocab_size {self.cfg.vocab_size}")

    def embed(self, ids: np.ndarray) -> Tensor:
        return self.tok(ids)

    def features_from_embeddings(self, x: Tensor, mask: np.ndarray) -> Tensor:
        """Run the blocks on token embeddings [B, L, D] (positions added here)."""
        length = x.shape[1]
        x = x + self.pos(np.arange(length))
        for block in self.blocks:
            x = block(x, mask)
        return self.ln_f(x)

    def pool(self, features: Tensor, mask: np.ndarray) -> Tensor:
        pooled = self.proj(F.masked_mean_pool(features, mask))
        return F.l2_normalize(pooled) if self.cfg.normalize else pooled

    def __call__(self, ids: np.ndarray, mask: np.ndarray) -> Encoded:
        self._check_ids(ids)
        mask = np.asarray(mask, dtype=bool)
        feats = self.features_from_embeddings(self.embed(ids), mask)
        return Encoded(feats, self.pool(feats, mask), mask)

    def encode_from_embeddings(self, x: Tensor, mask: np.ndarray) -> Encoded:
        mask = np.asarray(mask, dtype=bool)
        feats = self.features_from_embeddings(x, mask)
        return Encoded(feats, self.pool(feats, mask), mask)


def _batch(tok: TokenizedSeq | tuple) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(tok, TokenizedSeq):
        return tok.ids[None, :], tok.attention_mask[None, :]
    ids, mask = tok
    return np.atleast_2d(ids), np.atleast_2d(mask)


def encode_protein_feats(tok: TokenizedSeq | tuple, model: TransformerEncoder) -> Encoded:
    """Encode one TokenizedSeq or an (ids, mask) batch with the protein encoder."""
    return model(*_batch(tok))


def encode_text_feats(tok: TokenizedSeq | tuple, model: TransformerEncoder) -> Encoded:
    return model(*_batch(tok))


def embed_pooled(model: TransformerEncoder, ids: np.ndarray, mask: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Pooled embeddings as a plain array, computed without a tape."""
    out = []
    with no_grad():
        for i in range(0, len(ids), batch_size):
            b_ids, b_mask = trim(ids[i : i + batch_size], mask[i : i + batch_size])
            out.append(model(b_ids, b_mask).pooled_embedding.data)
    if not out:
        return np.zeros((0, model.cfg.projection_dim), dtype=model.proj.weight.dtype)
    return np.concatenate(out)


def similarity(a, b):
    """Dot product along the last axis; equals cosine for unit-norm inputs.

    Accepts arrays or Tensors (the latter stay on the tape).
    """
    if isinstance(a, Tensor) or isinstance(b, Tensor):
        a = a if isinstance(a, Tensor) else Tensor(a)
        b = b if isinstance(b, Tensor) else Tensor(b)
        if a.shape[-1] != b.shape[-1]:
            raise ShapeError(f"similarity: dims {a.shape} and {b.shape} differ")
        return (a * b).sum(axis=-1)
    a, b = np.asarray(a), np.asarray(b)
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"similarity: dims {a.shape} and {b.shape} differ")
    return (a * b).sum(axis=-1)
