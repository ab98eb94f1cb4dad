"""Protein and biotext tokenizers with fixed-length framing."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import AMINO_ACIDS

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")

_WORD = re.compile(r"[^\W_]+", re.UNICODE)


class IllegalResidue(ValueError):
    def __init__(self, position: int, char: str):
        super().__init__(f"illegal residue {char!r} at position {position}")
        self.position = position
        self.char = char


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if self.tokens[: len(RESERVED)] != RESERVED:
            raise ValueError("vocabulary must start with the reserved tokens")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self._index.get(token, UNK)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def save(self, path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(tuple(lines))


PROTEIN_VOCAB = Vocabulary(RESERVED + tuple(AMINO_ACIDS))
RESIDUE_IDS = np.arange(len(RESERVED), len(PROTEIN_VOCAB))


@dataclass(frozen=True)
class TokenizedSeq:
    ids: np.ndarray
    attention_mask: np.ndarray
    true_length: int


def _frame(body: Sequence[int], max_len: int) -> TokenizedSeq:
    if max_len < 2:
        raise ValueError(f"max_len must be >= 2, got {max_len}")
    body = list(body[: max_len - 2])
    ids = np.full(max_len, PAD, dtype=np.int64)
    n = len(body) + 2
    ids[0] = BOS
    ids[1 : n - 1] = body
    ids[n - 1] = EOS
    mask = np.zeros(max_len, dtype=bool)
    mask[:n] = True
    return TokenizedSeq(ids, mask, n)


def residue_ids(seq: str) -> list[int]:
    out = []
    for i, ch in enumerate(seq):
        if ch == "X":
            out.append(UNK)
            continue
        tid = PROTEIN_VOCAB._index.get(ch)
        if tid is None or tid < len(RESERVED):
            raise IllegalResidue(i, ch)
        out.append(tid)
    return out


def encode_protein(seq: str, max_len: int = 1024) -> TokenizedSeq:
    return _frame(residue_ids(seq), max_len)


def decode_protein(ids: Iterable[int]) -> str:
    """Residues after BOS up to the first EOS (or the end); PAD is skipped."""
    ids = [int(i) for i in ids]
    start = 1 if ids and ids[0] == BOS else 0
    chars = []
    for tid in ids[start:]:
        if tid == EOS:
            break
        if tid == PAD or tid == BOS:
            continue
        chars.append("X" if tid == UNK else PROTEIN_VOCAB.tokens[tid])
    return "".join(chars)


def words(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def encode_text(text: str, vocab: Vocabulary, max_len: int = 512) -> TokenizedSeq:
    return _frame([vocab.id(w) for w in words(text)], max_len)


def build_text_vocab(texts: Iterable[str], max_size: int) -> Vocabulary:
    """Most frequent ``max_size`` words; ties broken lexicographically."""
    counts = Counter()
    for t in texts:
        counts.update(words(t))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(RESERVED + tuple(w for w, _ in ranked[:max_size] if w not in RESERVED))


def stack_tokenized(items: Sequence[TokenizedSeq]) -> tuple[np.ndarray, np.ndarray]:
    """Stack into ([B, L] ids, [B, L] mask)."""
    return (
        np.stack([t.ids for t in items]),
        np.stack([t.attention_mask for t in items]),
    )


def encode_proteins(seqs: Sequence[str], max_len: int) -> tuple[np.ndarray, np.ndarray]:
    return stack_tokenized([encode_protein(s, max_len) for s in seqs])


def encode_texts(texts: Sequence[str], vocab: Vocabulary, max_len: int) -> tuple[np.ndarray, np.ndarray]:
    return stack_tokenized([encode_text(t, vocab, max_len) for t in texts])


def trim(ids: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop trailing all-PAD columns from a batch."""
    width = int(np.asarray(mask).sum(axis=1).max()) if len(mask) else 0
    return ids[:, :width], mask[:, :width]
