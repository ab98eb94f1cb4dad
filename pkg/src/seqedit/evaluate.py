"""Metrics and scorers: AUPR, Fmax, stability criteria, naturalness, PCA export."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .encoders import embed_pooled
from .numerics import functional as F
from .numerics.layers import Linear, Module
from .numerics.optim import Adam
from .numerics.tensor import Tensor, no_grad
from .tokenize import BOS, EOS, encode_proteins, residue_ids

log = logging.getLogger(__name__)


# -- classification metrics ------------------------------------------------------


def precision_recall_points(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """(precision, recall) at each distinct score threshold, highest first.

    Items sharing a score enter together (ties grouped).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} must be equal-length vectors")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("aupr needs at least one positive label")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # last index of every run of equal scores
    last = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tp, fp = tp[last], fp[last]
    return tp / (tp + fp), tp / n_pos


def aupr(scores, labels) -> float:
    """Area under the PR curve with the interpolated (envelope) precision.

    Each recall step is weighted by the best precision achievable at that
    recall or beyond; no trapezoids.
    """
    precision, recall = precision_recall_points(scores, labels)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.r_[0.0, recall])
    return float(np.sum(steps * envelope))


DEFAULT_GRID = tuple(k / 100 for k in range(1, 101))


def f_max(scores, truth, thresholds: Sequence[float] = DEFAULT_GRID) -> float:
    """Protein-centric maximum F1 over the threshold grid.

    scores: [n_proteins, n_labels]; truth: boolean matrix of the same shape
    (or a list of label-index sets). A label is predicted when its score is
    >= t. Precision is averaged over proteins with at least one prediction,
    recall over all proteins (a protein with no true labels contributes 0).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError(f"scores must be [proteins, labels], got {scores.shape}")
    truth = _truth_matrix(truth, scores.shape)
    if not len(thresholds):
        raise ValueError("threshold grid is empty")
    n_true = truth.sum(axis=1)
    denom = np.maximum(n_true, 1)
    best = 0.0
    for t in thresholds:
        pred = scores >= t
        n_pred = pred.sum(axis=1)
        covered = n_pred > 0
        if not covered.any():
            continue
        tp = (pred & truth).sum(axis=1)
        precision = np.mean(tp[covered] / n_pred[covered])
        recall = np.mean(tp / denom)
        if precision + recall > 0:
            best = max(best, 2 * precision * recall / (precision + recall))
    return float(best)


def _truth_matrix(truth, shape) -> np.ndarray:
    if isinstance(truth, np.ndarray) and truth.shape == shape:
        return truth.astype(bool)
    out = np.zeros(shape, dtype=bool)
    for i, labels in enumerate(truth):
        for j in labels:
            if not 0 <= j < shape[1]:
                raise ValueError(f"label id {j} outside label space of size {shape[1]}")
            out[i, j] = True
    return out


# -- stability criteria ----------------------------------------------------------


def stability_similarity(seqs, instruction: str, bundle) -> np.ndarray | float:
    """Similarity between each sequence's pooled embedding and the instruction's."""
    from .editor import pooled_for, text_pooled

    single = isinstance(seqs, str)
    seqs = [seqs] if single else list(seqs)
    t = text_pooled(bundle, [instruction])[0]
    sims = pooled_for(bundle, seqs) @ t
    return float(sims[0]) if single else sims


class OracleModel(Module):
    """Two hidden ReLU layers mapping a pooled embedding to a stability score."""

    def __init__(self, d_in: int, rng: np.random.Generator, hidden: int = 256, dtype=np.float32):
        self.fc1 = Linear(d_in, hidden, rng, dtype)
        self.fc2 = Linear(hidden, hidden, rng, dtype)
        self.out = Linear(hidden, 1, rng, dtype)
        self.y_mean = 0.0
        self.y_std = 1.0

    def __call__(self, x) -> Tensor:
        h = self.fc1(x).relu()
        h = self.fc2(h).relu()
        return self.out(h).reshape(-1)

    def predict(self, emb: np.ndarray) -> np.ndarray:
        with no_grad():
            z = self(Tensor(np.asarray(emb, dtype=self.fc1.weight.dtype))).data
        return z.astype(np.float64) * self.y_std + self.y_mean


@dataclass
class OracleFit:
    model: OracleModel
    mse_history: list[float] = field(default_factory=list)


def train_oracle(
    data: Sequence[tuple[str, float]],
    bundle,
    seed: int = 0,
    epochs: int = 200,
    lr: float = 1e-3,
    batch_size: int = 32,
    hidden: int = 256,
) -> OracleFit:
    """Fit the MLP on frozen pooled embeddings with mean-squared error.

    Targets are standardized internally; ``mse_history`` is in the original
    units, entry 0 being the untrained model.
    """
    if len(data) < 32:
        raise ValueError(f"need at least 32 labeled examples, got {len(data)}")
    seqs = [s for s, _ in data]
    y = np.array([v for _, v in data], dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError("stability labels must be finite")
    if np.var(y) == 0:
        raise ValueError("zero-variance target")
    emb = pooled_embeddings(seqs, bundle)
    rng = np.random.default_rng(seed)
    model = OracleModel(emb.shape[1], rng, hidden, emb.dtype)
    model.y_mean, model.y_std = float(y.mean()), float(y.std())
    z = ((y - model.y_mean) / model.y_std).astype(emb.dtype)
    opt = Adam(model.parameters(), base_lr=lr, warmup_steps=0)

    def full_mse() -> float:
        return float(np.mean((model.predict(emb) - y) ** 2))

    history = [full_mse()]
    n = len(y)
    for _ in range(epochs):
        order = rng.permutation(n)
        for s in range(0, n, batch_size):
            idx = order[s : s + batch_size]
            pred = model(Tensor(emb[idx]))
            loss = ((pred - Tensor(z[idx])) ** 2).mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
        history.append(full_mse())
    return OracleFit(model, history)


def pooled_embeddings(seqs: Sequence[str], bundle) -> np.ndarray:
    ids, mask = encode_proteins(list(seqs), bundle.protein_cfg.max_len)
    return embed_pooled(bundle.protein_encoder, ids, mask)


def oracle_score(seqs, oracle: OracleModel, bundle) -> np.ndarray | float:
    single = isinstance(seqs, str)
    seqs = [seqs] if single else list(seqs)
    out = oracle.predict(pooled_embeddings(seqs, bundle))
    return float(out[0]) if single else out


@dataclass
class ImprovementReport:
    fraction: float
    deltas: np.ndarray
    mean_original: float
    mean_edited: float
    mean_original_normalized: float
    mean_edited_normalized: float


def improvement_rate(originals: Sequence[str], editeds: Sequence[str], scorer: Callable) -> ImprovementReport:
    """Fraction of index-matched items whose edited score beats the original.

    ``scorer`` maps a list of sequences to a score array. Normalized means
    use min-max scaling over the pooled original+edited scores.
    """
    if len(originals) != len(editeds):
        raise ValueError(f"count mismatch: {len(originals)} originals vs {len(editeds)} edited")
    if not originals:
        raise ValueError("no items to compare")
    so = np.asarray(scorer(list(originals)), dtype=np.float64)
    se = np.asarray(scorer(list(editeds)), dtype=np.float64)
    deltas = se - so
    both = np.r_[so, se]
    lo, hi = both.min(), both.max()
    span = hi - lo

    def norm(v):
        return float(np.mean((v - lo) / span)) if span > 0 else 0.0

    return ImprovementReport(
        fraction=float(np.mean(se > so)),
        deltas=deltas,
        mean_original=float(so.mean()),
        mean_edited=float(se.mean()),
        mean_original_normalized=norm(so),
        mean_edited_normalized=norm(se),
    )


# -- naturalness ----------------------------------------------------------------


def naturalness(seq: str, bundle) -> float:
    """Negative mean per-token cross entropy under the unconditioned decoder."""
    if not seq:
        raise ValueError("naturalness of an empty sequence is undefined")
    editor = bundle.editor
    if editor is None:
        raise ValueError("bundle has no trained editor")
    body = residue_ids(seq)
    ids = np.array([[BOS] + body], dtype=np.int64)
    targets = np.array(body + [EOS])
    with no_grad():
        memory, mmask = editor.null_condition(1)
        logp = F.log_softmax(editor.decoder(ids, memory, mmask), axis=-1).data[0]
    return float(np.mean(logp[np.arange(len(targets)), targets]))


# -- embeddings export ----------------------------------------------------------


def export_embeddings(ids: Sequence[str], seqs: Sequence[str], bundle, out) -> np.ndarray:
    """Write ``id \\t c1 \\t c2 ...`` rows; returns the matrix."""
    mat = pooled_embeddings(seqs, bundle)
    write_matrix(ids, mat, out)
    return mat


def write_matrix(ids: Sequence[str], mat: np.ndarray, out) -> None:
    for name, row in zip(ids, mat):
        out.write(name + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")


def read_matrix(stream) -> tuple[list[str], np.ndarray]:
    names, rows = [], []
    for line in stream:
        line = line.rstrip("\n")
        if not line:
            continue
        cols = line.split("\t")
        names.append(cols[0])
        rows.append([float(v) for v in cols[1:]])
    return names, np.array(rows)


def pca_2d(mat) -> np.ndarray:
    """Centered coordinates on the top-2 covariance eigenvectors."""
    x = np.asarray(mat, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("pca_2d needs a matrix with at least 2 rows")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / (x.shape[0] - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    coords = np.zeros((x.shape[0], 2))
    coords[:, 0] = xc @ vecs[:, 0]
    if x.shape[1] < 2 or vals[1] <= 1e-12 * max(vals[0], 1e-300):
        warnings.warn("rank-deficient input: second component set to zero", stacklevel=2)
    else:
        coords[:, 1] = xc @ vecs[:, 1]
    return coords


# -- reports --------------------------------------------------------------------


def write_report(metrics: dict, out) -> None:
    for key in metrics:
        value = metrics[key]
        if isinstance(value, float):
            value = repr(value)
        out.write(f"{key} = {value}\n")


def read_report(stream) -> dict:
    out = {}
    for line in stream:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" = ")
        out[key] = value
    return out
