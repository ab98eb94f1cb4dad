"""Text-conditioned editing generator.

FiLM (or concatenation) fuses the pooled instruction embedding into the
frozen protein encoder's token features; a causal transformer decoder
cross-attends to the fused features and rewrites the sequence one residue at
a time.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import AMINO_ACIDS
from .encoders import EncoderConfig, similarity
from .numerics import functional as F
from .numerics.layers import DecoderBlock, Embedding, LayerNorm, Linear, Module, Parameter
from .numerics.optim import Adam
from .numerics.tensor import ShapeError, Tensor, as_tensor, concat, no_grad, where
from .tokenize import (
    BOS,
    EOS,
    PAD,
    PROTEIN_VOCAB,
    UNK,
    decode_protein,
    encode_protein,
    encode_proteins,
    encode_text,
    encode_texts,
    residue_ids,
    trim,
)

log = logging.getLogger(__name__)

FUSIONS = ("film", "concat")
RELAXATIONS = ("expected", "straight_through")
STOP_SLACK = 16


@dataclass
class EditorConfig:
    layers: int = 4
    heads: int = 4
    fusion: str = "film"
    # decoder positions; must cover original length + STOP_SLACK + BOS
    max_len: int = 1024 + STOP_SLACK
    label_smoothing: float = 0.1
    relaxation: str = "expected"
    hinge_margin: float = 0.0
    sim_weight: float = 1.0
    uncond_prob: float = 0.0

    def __post_init__(self):
        if self.fusion not in FUSIONS:
            raise ValueError(f"fusion must be one of {FUSIONS}, got {self.fusion!r}")
        if self.relaxation not in RELAXATIONS:
            raise ValueError(f"relaxation must be one of {RELAXATIONS}, got {self.relaxation!r}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must be in [0, 1)")
        if not 0.0 <= self.uncond_prob <= 1.0:
            raise ValueError("uncond_prob must be in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


# -- fusion --------------------------------------------------------------------


class FiLM(Module):
    """gamma = t W_g + b_g, beta = t W_b + b_b; starts as the identity map."""

    def __init__(self, text_dim: int, feat_dim: int, dtype=np.float32):
        self.w_gamma = Parameter(np.zeros((text_dim, feat_dim), dtype=dtype))
        self.b_gamma = Parameter(np.ones(feat_dim, dtype=dtype))
        self.w_beta = Parameter(np.zeros((text_dim, feat_dim), dtype=dtype))
        self.b_beta = Parameter(np.zeros(feat_dim, dtype=dtype))

    def __call__(self, features, text) -> Tensor:
        return film_fuse(features, text, self)


def film_fuse(features, text, params: FiLM) -> Tensor:
    """Modulate [L, d] or [B, L, d] features with one (gamma, beta) per item.

    ``text`` is [d_t] or [B, d_t]; the pair is broadcast over positions.
    """
    features, text = as_tensor(features), as_tensor(text)
    d_t, d = params.w_gamma.shape
    if features.shape[-1] != d:
        raise ShapeError(f"film_fuse: features {features.shape} vs FiLM output dim {d}")
    if text.shape[-1] != d_t:
        raise ShapeError(f"film_fuse: text {text.shape} vs FiLM input dim {d_t}")
    gamma = F.linear(text, params.w_gamma, params.b_gamma)
    beta = F.linear(text, params.w_beta, params.b_beta)
    if features.ndim == 3:
        if text.ndim != 2 or text.shape[0] != features.shape[0]:
            raise ShapeError(f"film_fuse: batch mismatch {features.shape} vs {text.shape}")
        gamma = gamma.reshape(gamma.shape[0], 1, d)
        beta = beta.reshape(beta.shape[0], 1, d)
    elif text.ndim != 1:
        raise ShapeError(f"film_fuse: unbatched features need a [d_t] text vector, got {text.shape}")
    return gamma * features + beta


class ConcatFusion(Module):
    """Map the text embedding to one extra memory position appended after the features."""

    def __init__(self, text_dim: int, feat_dim: int, rng: np.random.Generator, dtype=np.float32):
        self.proj = Linear(text_dim, feat_dim, rng, dtype)

    def __call__(self, features, text) -> Tensor:
        return concat_fuse(features, text, self)


def concat_fuse(features, text, params: ConcatFusion) -> Tensor:
    features, text = as_tensor(features), as_tensor(text)
    token = params.proj(text)
    if features.ndim == 3:
        token = token.reshape(token.shape[0], 1, token.shape[-1])
        return concat([features, token], axis=1)
    return concat([features, token.reshape(1, token.shape[-1])], axis=0)


# -- decoder -------------------------------------------------------------------


class Decoder(Module):
    def __init__(self, d: int, layers: int, heads: int, max_len: int, rng: np.random.Generator, dtype=np.float32):
        self.max_len = max_len
        vocab = len(PROTEIN_VOCAB)
        self.tok = Embedding(vocab, d, rng, dtype)
        self.pos = Embedding(max_len, d, rng, dtype)
        self.blocks = [DecoderBlock(d, heads, rng, dtype) for _ in range(layers)]
        self.ln_f = LayerNorm(d, dtype)
        self.head = Linear(d, vocab, rng, dtype)

    def __call__(self, ids: np.ndarray, memory: Tensor, memory_mask: np.ndarray | None) -> Tensor:
        """Logits [B, T, V] for every prefix position."""
        ids = np.atleast_2d(ids)
        t = ids.shape[1]
        if t < 1:
            raise ShapeError("decoder: empty prefix")
        if t > self.max_len:
            raise ShapeError(f"decoder: prefix length {t} exceeds max_len {self.max_len}")
        x = self.tok(ids) + self.pos(np.arange(t))
        for block in self.blocks:
            x = block(x, memory, memory_mask)
        return self.head(self.ln_f(x))


def decoder_logits(prefix: np.ndarray, memory: Tensor, memory_mask, model: Decoder) -> Tensor:
    """Next-token logits [B, V] after ``prefix`` (which starts at BOS)."""
    prefix = np.atleast_2d(prefix)
    if prefix.shape[1] < 1 or np.any(prefix[:, 0] != BOS):
        raise ValueError("prefix must start with BOS")
    logits = model(prefix, memory, memory_mask)
    return logits[:, -1, :]


class Editor(Module):
    def __init__(self, cfg: EditorConfig, protein_cfg: EncoderConfig, rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        d = protein_cfg.model_dim
        d_t = protein_cfg.projection_dim
        if cfg.fusion == "film":
            self.fusion = FiLM(d_t, d, dtype)
        else:
            self.fusion = ConcatFusion(d_t, d, rng, dtype)
        self.decoder = Decoder(d, cfg.layers, cfg.heads, cfg.max_len, rng, dtype)
        self.d = d

    def condition(self, features: Tensor, text: Tensor, mask: np.ndarray) -> tuple[Tensor, np.ndarray]:
        """Fused memory and its key mask."""
        fused = self.fusion(features, text)
        mask = np.asarray(mask, dtype=bool)
        if self.cfg.fusion == "concat":
            mask = np.concatenate([mask, np.ones((mask.shape[0], 1), dtype=bool)], axis=1)
        return fused, mask

    def null_condition(self, batch: int) -> tuple[Tensor, np.ndarray]:
        """Single all-zero memory slot, used for unconditioned scoring."""
        dtype = self.decoder.tok.weight.dtype
        return Tensor(np.zeros((batch, 1, self.d), dtype=dtype)), np.ones((batch, 1), dtype=bool)


# -- loss ----------------------------------------------------------------------


@dataclass
class LossParts:
    total: Tensor
    term1: Tensor
    term2: Tensor
    sim_original: np.ndarray
    sim_edited: np.ndarray


def hinge(x):
    """max(0, x)."""
    if isinstance(x, Tensor):
        return x.relu()
    return np.maximum(0.0, x)


def editing_loss(
    ids: np.ndarray,
    mask: np.ndarray,
    text_embedding,
    editor: Editor,
    protein_encoder,
    label_smoothing: float | None = None,
    hinge_margin: float | None = None,
    sim_weight: float | None = None,
    relaxation: str | None = None,
) -> LossParts:
    """Similarity hinge plus label-smoothed imitation of the original sequence.

    The decoder is teacher-forced on the original at its own length. The
    edited sequence's embedding comes from the expected token embedding
    under the decoder's distribution at each residue position, passed
    through the frozen protein encoder. With ``relaxation="straight_through"``
    the forward pass uses the argmax token embedding instead while gradients
    follow the expectation.
    """
    cfg = editor.cfg
    eps = cfg.label_smoothing if label_smoothing is None else label_smoothing
    margin = cfg.hinge_margin if hinge_margin is None else hinge_margin
    weight = cfg.sim_weight if sim_weight is None else sim_weight
    relaxation = cfg.relaxation if relaxation is None else relaxation
    ids = np.atleast_2d(ids)
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    text = as_tensor(text_embedding)

    enc = protein_encoder(ids, mask)
    sim_o = similarity(enc.pooled_embedding, text)

    memory, mem_mask = editor.condition(enc.token_features, text, mask)
    logits = editor.decoder(ids[:, :-1], memory, mem_mask)
    targets = ids[:, 1:]
    tmask = mask[:, 1:]
    vocab = logits.shape[-1]
    term2 = F.cross_entropy_soft(logits, F.smooth_labels(targets, vocab, eps, logits.dtype), tmask)

    probs = F.softmax(logits, axis=-1)
    table = protein_encoder.tok.weight
    soft = probs @ table
    if relaxation == "straight_through":
        hard = table.data[probs.data.argmax(axis=-1)]
        soft = soft + Tensor(hard - soft.data)
    b, _, d = soft.shape
    shifted = concat([Tensor(np.zeros((b, 1, d), dtype=soft.dtype)), soft], axis=1)
    residue_pos = mask & (ids != BOS) & (ids != EOS) & (ids != PAD)
    hard_inputs = Tensor(table.data[ids])
    x = where(residue_pos[..., None], shifted, hard_inputs)
    sim_e = similarity(protein_encoder.encode_from_embeddings(x, mask).pooled_embedding, text)

    term1 = hinge(sim_o - sim_e + margin).mean()
    total = term1 * weight + term2
    return LossParts(total, term1, term2, np.asarray(sim_o.data), np.asarray(sim_e.data))


def sequence_logprob(seq: str, instruction_embedding, editor: Editor, protein_encoder, original: str, with_eos: bool = True) -> float:
    """Teacher-forced log P(seq | FiLM(original, instruction)) under the full vocabulary."""
    orig = encode_protein(original, protein_encoder.cfg.max_len)
    with no_grad():
        enc = protein_encoder(orig.ids[None, : orig.true_length], orig.attention_mask[None, : orig.true_length])
        memory, mmask = editor.condition(enc.token_features, as_tensor(instruction_embedding).reshape(1, -1), enc.mask)
        body = residue_ids(seq)
        ids = np.array([[BOS] + body], dtype=np.int64)
        targets = body + ([EOS] if with_eos else [])
        logp = F.log_softmax(editor.decoder(ids, memory, mmask), axis=-1).data[0]
    n = len(targets)
    return float(sum(logp[i, t] for i, t in enumerate(targets[:n])))


# -- generation ----------------------------------------------------------------


@dataclass
class EditRequest:
    original: str
    instruction: str
    sampling: str = "greedy"  # greedy | temperature | top_k
    temperature: float = 1.0
    top_k: int = 0
    max_len: int | None = None
    num_samples: int = 1
    seed: int = 0
    accession: str = "query"

    def __post_init__(self):
        if self.sampling not in ("greedy", "temperature", "top_k"):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.sampling != "greedy" and self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.sampling == "top_k" and self.top_k < 1:
            raise ValueError("top_k sampling needs top_k >= 1")


@dataclass
class EditCandidate:
    sequence: str
    logprob: float
    sim_original: float
    sim_edited: float
    edit_distance: int
    empty: bool = False
    step_logprobs: list = field(default_factory=list, repr=False)


@dataclass
class EditResult:
    accession: str
    original: str
    candidates: list[EditCandidate]


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance."""
    if len(a) < len(b):
        a, b = b, a
    prev = np.arange(len(b) + 1)
    for i, ca in enumerate(a, start=1):
        cur = np.empty_like(prev)
        cur[0] = i
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return int(prev[-1])


_BANNED = np.array([PAD, BOS, UNK])


def _choose(logits: np.ndarray, req: EditRequest, rng: np.random.Generator, allow_eos: bool) -> np.ndarray:
    """Pick one token per row; reserved ids (and EOS when disallowed) are never chosen."""
    z = logits.astype(np.float64).copy()
    z[:, _BANNED] = -np.inf
    if not allow_eos:
        z[:, EOS] = -np.inf
    if req.sampling == "greedy":
        return z.argmax(axis=1)
    z = z / req.temperature
    if req.sampling == "top_k":
        k = min(req.top_k, z.shape[1])
        kth = np.sort(z, axis=1)[:, -k][:, None]
        z = np.where(z >= kth, z, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    u = rng.random(len(p))[:, None]
    idx = (np.cumsum(p, axis=1) < u).sum(axis=1)
    # guard against cumsum rounding just below 1
    return np.minimum(idx, p.shape[1] - 1)


def _encode_condition(bundle, original: str, instruction: str):
    editor = bundle.editor
    tok = encode_protein(original, bundle.protein_cfg.max_len)
    n = tok.true_length
    ttok = encode_text(instruction, bundle.text_vocab, bundle.text_cfg.max_len)
    with no_grad():
        enc = bundle.protein_encoder(tok.ids[None, :n], tok.attention_mask[None, :n])
        text = bundle.text_encoder(ttok.ids[None, : ttok.true_length], ttok.attention_mask[None, : ttok.true_length])
        memory, mmask = editor.condition(enc.token_features, text.pooled_embedding, enc.mask)
    return enc, text.pooled_embedding.data[0], memory, mmask


def sample_tokens(
    editor: Editor,
    memory: Tensor,
    mmask: np.ndarray,
    req: EditRequest,
    cap: int,
    rng: np.random.Generator,
    forced_prefix: list[int] | None = None,
    region_len: int | None = None,
):
    """Autoregressive sampling of ``req.num_samples`` rows sharing one condition.

    Returns (token lists, per-step log-prob lists). With ``forced_prefix`` the
    first tokens are copied verbatim and exactly ``region_len`` further
    residues are sampled (EOS disallowed).
    """
    s = req.num_samples
    mem = Tensor(np.repeat(memory.data, s, axis=0))
    mm = np.repeat(mmask, s, axis=0)
    forced = list(forced_prefix or [])
    ids = np.full((s, 1), BOS, dtype=np.int64)
    done = np.zeros(s, dtype=bool)
    tokens = [[] for _ in range(s)]
    steps = [[] for _ in range(s)]
    total = len(forced) + region_len if region_len is not None else cap
    with no_grad():
        for pos in range(total):
            if pos < len(forced):
                nxt = np.full(s, forced[pos], dtype=np.int64)
                ids = np.concatenate([ids, nxt[:, None]], axis=1)
                continue
            logits = editor.decoder(ids, mem, mm).data[:, -1, :]
            logp = logits - logits.max(axis=1, keepdims=True)
            logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
            nxt = _choose(logits, req, rng, allow_eos=region_len is None)
            for r in range(s):
                if done[r]:
                    continue
                steps[r].append(float(logp[r, nxt[r]]))
                if nxt[r] == EOS:
                    done[r] = True
                else:
                    tokens[r].append(int(nxt[r]))
            if done.all():
                break
            ids = np.concatenate([ids, np.where(done, PAD, nxt)[:, None]], axis=1)
    return tokens, steps


def generate(req: EditRequest, bundle) -> EditResult:
    if bundle.editor is None:
        raise ValueError("bundle has no trained editor")
    editor = bundle.editor
    residue_ids(req.original)  # validates residues
    enc, text_vec, memory, mmask = _encode_condition(bundle, req.original, req.instruction)
    cap = len(req.original) + STOP_SLACK
    cap = min(cap, editor.decoder.max_len - 1)
    if req.max_len is not None:
        if req.max_len > editor.decoder.max_len - 1:
            raise ValueError(f"max_len {req.max_len} exceeds decoder capacity {editor.decoder.max_len - 1}")
        cap = min(cap, req.max_len)
    rng = np.random.default_rng(req.seed)
    tokens, steps = sample_tokens(editor, memory, mmask, req, cap, rng)
    sim_o = float(similarity(enc.pooled_embedding.data[0], text_vec))
    seqs = [decode_protein([BOS] + t + [EOS]) for t in tokens]
    sims = pooled_for(bundle, seqs) @ text_vec
    cands = []
    for seq, st, se in zip(seqs, steps, sims):
        if not seq:
            log.warning("empty generation for %s", req.accession)
        cands.append(
            EditCandidate(
                sequence=seq,
                logprob=float(np.sum(st)),
                sim_original=sim_o,
                sim_edited=float(se),
                edit_distance=edit_distance(req.original, seq),
                empty=not seq,
                step_logprobs=st,
            )
        )
    return EditResult(req.accession, req.original, cands)


def pooled_for(bundle, seqs: list[str]) -> np.ndarray:
    from .encoders import embed_pooled

    ids, mask = encode_proteins(seqs, bundle.protein_cfg.max_len)
    return embed_pooled(bundle.protein_encoder, ids, mask)


def text_pooled(bundle, texts: list[str]) -> np.ndarray:
    from .encoders import embed_pooled

    ids, mask = encode_texts(texts, bundle.text_vocab, bundle.text_cfg.max_len)
    return embed_pooled(bundle.text_encoder, ids, mask)


def write_results(results: list[EditResult], out) -> int:
    """TSV rows: accession, edited, logprob, sim_original, sim_edited, edit_distance."""
    out.write("accession\tedited_sequence\tlogprob\tsim_original\tsim_edited\tedit_distance\n")
    n = 0
    for res in results:
        for c in res.candidates:
            out.write(
                f"{res.accession}\t{c.sequence}\t{c.logprob!r}\t{c.sim_original!r}\t{c.sim_edited!r}\t{c.edit_distance}\n"
            )
            n += 1
    return n


def read_results(stream) -> list[dict]:
    rows = []
    header = None
    for line in stream:
        line = line.rstrip("\n")
        if not line:
            continue
        cols = line.split("\t")
        if header is None:
            header = cols
            continue
        row = dict(zip(header, cols))
        for key in ("logprob", "sim_original", "sim_edited"):
            row[key] = float(row[key])
        row["edit_distance"] = int(row["edit_distance"])
        rows.append(row)
    return rows


# -- training ------------------------------------------------------------------


@dataclass
class EditorTrainConfig:
    batch_size: int = 32
    epochs: int = 10
    lr: float = 5e-5
    warmup_steps: int = 2000


@dataclass
class EditorEpochLog:
    epoch: int
    loss: float
    term1: float
    term2: float
    wall_ms: float

    def line(self) -> str:
        return (
            f"epoch={self.epoch} loss_edit={self.loss:.6f} term1={self.term1:.6f} "
            f"term2={self.term2:.6f} wall_ms={self.wall_ms:.0f}"
        )


def init_editor(bundle, cfg: EditorConfig, seed: int) -> Editor:
    rng = np.random.default_rng(seed)
    editor = Editor(cfg, bundle.protein_cfg, rng, bundle.dtype)
    bundle.editor = editor
    bundle.editor_cfg = cfg
    return editor


def train_editor(bundle, cfg: EditorConfig, train_cfg: EditorTrainConfig, pairs, seed: int, on_epoch=None):
    """Fit fusion + decoder with the encoders frozen. Mutates and returns ``bundle``.

    ``pairs`` supply (original sequence, instruction text).
    """
    if cfg.max_len < bundle.protein_cfg.max_len:
        cfg = EditorConfig(**{**cfg.to_dict(), "max_len": bundle.protein_cfg.max_len + STOP_SLACK})
    before = bundle.encoder_checksum()
    bundle.freeze_encoders()
    editor = init_editor(bundle, cfg, seed)
    rng = np.random.default_rng(seed + 1)
    ids, mask = encode_proteins([p.sequence for p in pairs], bundle.protein_cfg.max_len)
    texts = text_pooled(bundle, [p.text for p in pairs])
    opt = Adam(editor.parameters(), base_lr=train_cfg.lr, warmup_steps=train_cfg.warmup_steps)
    logs = []
    n = len(pairs)
    for epoch in range(1, train_cfg.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        sums = np.zeros(3)
        batches = 0
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start : start + train_cfg.batch_size]
            b_ids, b_mask = trim(ids[idx], mask[idx])
            uncond = cfg.uncond_prob > 0 and rng.random() < cfg.uncond_prob
            if uncond:
                loss = unconditional_loss(b_ids, b_mask, editor, cfg.label_smoothing)
                parts = (float(loss.data), 0.0, float(loss.data))
            else:
                lp = editing_loss(b_ids, b_mask, Tensor(texts[idx]), editor, bundle.protein_encoder)
                loss = lp.total
                parts = (float(lp.total.data), float(lp.term1.data), float(lp.term2.data))
            if not np.isfinite(loss.data):
                raise FloatingPointError(f"non-finite editing loss at epoch {epoch}, step {opt.step_count + 1}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            sums += parts
            batches += 1
        means = sums / max(batches, 1)
        entry = EditorEpochLog(epoch, *means, (time.perf_counter() - t0) * 1e3)
        log.info(entry.line())
        logs.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    if bundle.encoder_checksum() != before:
        raise RuntimeError("encoder parameters changed during editor training")
    bundle.meta = {**bundle.meta, "stage": "editor", "editor_seed": int(seed), "editor_epochs": train_cfg.epochs}
    return bundle, logs


def unconditional_loss(ids: np.ndarray, mask: np.ndarray, editor: Editor, eps: float) -> Tensor:
    memory, mmask = editor.null_condition(ids.shape[0])
    logits = editor.decoder(ids[:, :-1], memory, mmask)
    targets = F.smooth_labels(ids[:, 1:], logits.shape[-1], eps, logits.dtype)
    return F.cross_entropy_soft(logits, targets, mask[:, 1:])


# -- antibody harness ----------------------------------------------------------


def perturb_region(seq: str, region: tuple[int, int], rate: float, rng: np.random.Generator) -> str:
    """Substitute each residue in [start, end) with prob ``rate`` by one of the other 19."""
    start, end = region
    if not 0 <= start <= end <= len(seq):
        raise ValueError(f"region {region} outside sequence of length {len(seq)}")
    if start == end:
        warnings.warn("empty perturbation region; sequence returned unchanged", stacklevel=2)
        return seq
    out = list(seq)
    for i in range(start, end):
        if rng.random() < rate:
            choices = [a for a in AMINO_ACIDS if a != out[i]]
            out[i] = choices[rng.integers(len(choices))]
    return "".join(out)


@dataclass
class AntibodyCandidate:
    sequence: str
    region: str
    naturalness: float


def optimize_antibody(
    seq: str,
    region: tuple[int, int],
    instruction: str,
    bundle,
    n_samples: int = 100,
    top_k: int = 5,
    rate: float = 0.15,
    seed: int = 0,
    temperature: float = 1.0,
) -> list[AntibodyCandidate]:
    """Perturb the region, resample it conditioned on the noisy chain, keep the most natural.

    Framework residues outside ``region`` are copied from ``seq``.
    """
    from .evaluate import naturalness

    if top_k > n_samples:
        raise ValueError("top_k cannot exceed n_samples")
    rng = np.random.default_rng(seed)
    start, end = region
    noisy = perturb_region(seq, region, rate, rng)
    _, _, memory, mmask = _encode_condition(bundle, noisy, instruction)
    req = EditRequest(noisy, instruction, sampling="temperature", temperature=temperature, num_samples=n_samples, seed=seed)
    prefix = residue_ids(seq[:start])
    tokens, _ = sample_tokens(bundle.editor, memory, mmask, req, cap=0, rng=rng, forced_prefix=prefix, region_len=end - start)
    cands = []
    for toks in tokens:
        piece = decode_protein([BOS] + toks + [EOS])
        full = seq[:start] + piece + seq[end:]
        cands.append(AntibodyCandidate(full, piece, naturalness(full, bundle)))
    cands.sort(key=lambda c: -c.naturalness)
    return cands[:top_k]
