"""Symmetric contrastive alignment of protein and biotext embeddings."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .encoders import EncoderConfig, TransformerEncoder, embed_pooled
from .numerics import functional as F
from .numerics.optim import Adam
from .numerics.tensor import Tensor, as_tensor
from .tokenize import PROTEIN_VOCAB, Vocabulary, build_text_vocab, encode_proteins, encode_texts, trim

log = logging.getLogger(__name__)


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")


def _diag_nll_sum(logits: Tensor) -> Tensor:
    """``-(1/N) * sum_i log softmax(logits[i])[i]``; log_softmax shifts by the row max."""
    n = logits.shape[0]
    logp = F.log_softmax(logits, axis=1)
    eye = np.eye(n, dtype=logits.dtype)
    return -(logp * eye).sum() * (1.0 / n)


def similarity_matrix(f_p, f_t) -> Tensor:
    f_p, f_t = as_tensor(f_p), as_tensor(f_t)
    if f_p.shape != f_t.shape or f_p.ndim != 2:
        raise ValueError(f"expected two [N, P] embedding sets, got {f_p.shape} and {f_t.shape}")
    return f_p @ f_t.transpose()


def loss_p2t_from_sims(sims, tau: float = 0.01) -> Tensor:
    _check_tau(tau)
    return _diag_nll_sum(as_tensor(sims) * (1.0 / tau))


def loss_t2p_from_sims(sims, tau: float = 0.01) -> Tensor:
    _check_tau(tau)
    return _diag_nll_sum(as_tensor(sims).transpose() * (1.0 / tau))


def loss_align_from_sims(sims, tau: float = 0.01) -> Tensor:
    return (loss_p2t_from_sims(sims, tau) + loss_t2p_from_sims(sims, tau)) * 0.5


def loss_p2t(f_p, f_t, tau: float = 0.01) -> Tensor:
    """Summed protein-to-text terms: each L_i carries its own 1/N."""
    return loss_p2t_from_sims(similarity_matrix(f_p, f_t), tau)


def loss_t2p(f_p, f_t, tau: float = 0.01) -> Tensor:
    return loss_t2p_from_sims(similarity_matrix(f_p, f_t), tau)


def loss_align(f_p, f_t, tau: float = 0.01) -> Tensor:
    """Half the sum over i of the p2t and t2p terms."""
    return loss_align_from_sims(similarity_matrix(f_p, f_t), tau)


def retrieval_topk(emb_p: np.ndarray, emb_t: np.ndarray, k: int = 1) -> float:
    """Fraction of proteins whose paired text ranks within the top ``k``.

    Ties are broken toward the lower index.
    """
    emb_p, emb_t = np.asarray(emb_p), np.asarray(emb_t)
    if emb_p.shape[0] != emb_t.shape[0]:
        raise ValueError(f"count mismatch: {emb_p.shape[0]} proteins vs {emb_t.shape[0]} texts")
    n = emb_p.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    sims = emb_p @ emb_t.T
    diag = np.diag(sims)[:, None]
    idx = np.arange(n)
    better = (sims > diag) | ((sims == diag) & (idx[None, :] < idx[:, None]))
    rank = better.sum(axis=1)
    return float(np.mean(rank < k))


@dataclass
class AlignConfig:
    protein: EncoderConfig = field(default_factory=lambda: EncoderConfig(max_len=64))
    text: EncoderConfig = field(default_factory=lambda: EncoderConfig(max_len=24))
    text_vocab_size: int = 2000
    tau: float = 0.01
    batch_size: int = 32
    epochs: int = 10
    lr: float = 5e-5
    warmup_steps: int = 2000
    dtype: str = "float32"


@dataclass
class EpochLog:
    epoch: int
    loss_align: float
    top1: float
    top5: float
    wall_ms: float

    def line(self) -> str:
        return (
            f"epoch={self.epoch} loss_align={self.loss_align:.6f} top1={self.top1:.4f} "
            f"top5={self.top5:.4f} wall_ms={self.wall_ms:.0f}"
        )


def retrieval_scores(bundle, pairs, ks=(1, 5)) -> dict[int, float]:
    p_ids, p_mask = encode_proteins([p.sequence for p in pairs], bundle.protein_cfg.max_len)
    t_ids, t_mask = encode_texts([p.text for p in pairs], bundle.text_vocab, bundle.text_cfg.max_len)
    ep = embed_pooled(bundle.protein_encoder, p_ids, p_mask)
    et = embed_pooled(bundle.text_encoder, t_ids, t_mask)
    return {k: retrieval_topk(ep, et, min(k, len(pairs))) for k in ks}


def init_bundle(cfg: AlignConfig, text_vocab: Vocabulary, seed: int):
    from .bundle import ModelBundle

    dtype = np.dtype(cfg.dtype)
    rng = np.random.default_rng(seed)
    pcfg = EncoderConfig(**{**cfg.protein.to_dict(), "vocab_size": len(PROTEIN_VOCAB)})
    tcfg = EncoderConfig(**{**cfg.text.to_dict(), "vocab_size": len(text_vocab)})
    return ModelBundle(
        protein_cfg=pcfg,
        text_cfg=tcfg,
        text_vocab=text_vocab,
        protein_encoder=TransformerEncoder(pcfg, rng, dtype),
        text_encoder=TransformerEncoder(tcfg, rng, dtype),
        meta={"stage": "init", "seed": int(seed)},
    )


def pretrain(cfg: AlignConfig, pairs, seed: int, heldout=None, text_vocab: Vocabulary | None = None, on_epoch=None):
    """Contrastive pretraining of both encoders; returns (bundle, epoch logs).

    Retrieval metrics are reported on ``heldout`` when given, else on the
    first 256 training pairs.
    """
    if text_vocab is None:
        text_vocab = build_text_vocab([p.text for p in pairs], cfg.text_vocab_size)
    bundle = init_bundle(cfg, text_vocab, seed)
    rng = np.random.default_rng(seed + 1)
    p_ids, p_mask = encode_proteins([p.sequence for p in pairs], bundle.protein_cfg.max_len)
    t_ids, t_mask = encode_texts([p.text for p in pairs], text_vocab, bundle.text_cfg.max_len)
    params = bundle.protein_encoder.parameters() + bundle.text_encoder.parameters()
    opt = Adam(params, base_lr=cfg.lr, warmup_steps=cfg.warmup_steps)
    probe = heldout if heldout else pairs[:256]
    logs = []
    n = len(pairs)
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        total, batches = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            if len(idx) < 2:
                continue
            fp = bundle.protein_encoder(*trim(p_ids[idx], p_mask[idx])).pooled_embedding
            ft = bundle.text_encoder(*trim(t_ids[idx], t_mask[idx])).pooled_embedding
            loss = loss_align(fp, ft, cfg.tau)
            if not np.isfinite(loss.data):
                raise FloatingPointError(f"non-finite alignment loss at epoch {epoch}, step {opt.step_count + 1}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.data)
            batches += 1
        scores = retrieval_scores(bundle, probe)
        entry = EpochLog(epoch, total / max(batches, 1), scores[1], scores[5], (time.perf_counter() - t0) * 1e3)
        log.info(entry.line())
        logs.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    bundle.meta = {"stage": "align", "seed": int(seed), "epochs": cfg.epochs, "tau": cfg.tau}
    return bundle, logs


def initial_loss(bundle, pairs, tau: float, batch_size: int) -> float:
    """Mean alignment loss of a bundle over consecutive batches, no tape."""
    from .numerics.tensor import no_grad

    p_ids, p_mask = encode_proteins([p.sequence for p in pairs], bundle.protein_cfg.max_len)
    t_ids, t_mask = encode_texts([p.text for p in pairs], bundle.text_vocab, bundle.text_cfg.max_len)
    vals = []
    with no_grad():
        for s in range(0, len(pairs), batch_size):
            sl = slice(s, s + batch_size)
            if len(p_ids[sl]) < 2:
                continue
            fp = bundle.protein_encoder(p_ids[sl], p_mask[sl]).pooled_embedding
            ft = bundle.text_encoder(t_ids[sl], t_mask[sl]).pooled_embedding
            vals.append(float(loss_align(fp, ft, tau).data))
    return float(np.mean(vals))
