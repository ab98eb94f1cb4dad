"""Synthetic protein/text corpora whose texts describe sequence composition.

The texts are a deterministic function of (dominant residue, length
bucket), so a small dual encoder can learn the alignment on a CPU.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .corpus import AMINO_ACIDS, AnnotationRecord, Pair

RESIDUE_NAMES = {
    "A": "alanine",
    "C": "cysteine",
    "D": "aspartate",
    "E": "glutamate",
    "F": "phenylalanine",
    "G": "glycine",
    "H": "histidine",
    "I": "isoleucine",
    "K": "lysine",
    "L": "leucine",
    "M": "methionine",
    "N": "asparagine",
    "P": "proline",
    "Q": "glutamine",
    "R": "arginine",
    "S": "serine",
    "T": "threonine",
    "V": "valine",
    "W": "tryptophan",
    "Y": "tyrosine",
}

# bucket word -> inclusive length range
LENGTH_BUCKETS = {
    "tiny": (10, 15),
    "short": (20, 25),
    "medium": (30, 35),
    "long": (40, 45),
}

CLASSES = list(product(AMINO_ACIDS, LENGTH_BUCKETS))


def describe(residue: str, bucket: str) -> str:
    return f"high {RESIDUE_NAMES[residue]} content, {bucket} length"


def instruction_for(residue: str) -> str:
    return f"high {RESIDUE_NAMES[residue]} content"


def sample_sequence(
    rng: np.random.Generator, residue: str, length: int, enrichment: float = 0.4, lead: int = 2
) -> str:
    """Random sequence where ``residue`` fills each position with prob ``enrichment``.

    Draws are repeated until ``residue`` outnumbers every other residue by at
    least ``lead``, so the description stays true for short sequences.
    """
    others = [a for a in AMINO_ACIDS if a != residue]
    while True:
        out = []
        for _ in range(length):
            if rng.random() < enrichment:
                out.append(residue)
            else:
                out.append(others[rng.integers(len(others))])
        seq = "".join(out)
        top_other = max(seq.count(a) for a in others)
        if seq.count(residue) >= top_other + lead:
            return seq


def _pair(rng, idx: int, residue: str, bucket: str, prefix: str, enrichment: float) -> Pair:
    lo, hi = LENGTH_BUCKETS[bucket]
    seq = sample_sequence(rng, residue, int(rng.integers(lo, hi + 1)), enrichment)
    return Pair(f"{prefix}{idx:05d}", seq, describe(residue, bucket))


def composition_corpus(
    n_train: int = 512,
    n_heldout: int = 64,
    seed: int = 0,
    enrichment: float = 0.4,
) -> tuple[list[Pair], list[Pair]]:
    """Train pairs with random classes; held-out pairs with distinct classes.

    Held-out classes are drawn without replacement so every held-out text is
    unique and top-1 retrieval is well posed.
    """
    if n_heldout > len(CLASSES):
        raise ValueError(f"at most {len(CLASSES)} distinct held-out classes")
    rng = np.random.default_rng(seed)
    train = []
    for i in range(n_train):
        residue, bucket = CLASSES[rng.integers(len(CLASSES))]
        train.append(_pair(rng, i, residue, bucket, "SYN", enrichment))
    picks = rng.permutation(len(CLASSES))[:n_heldout]
    heldout = [_pair(rng, i, *CLASSES[c], "HLD", enrichment) for i, c in enumerate(picks)]
    return train, heldout


def attribute_task(
    n: int = 256,
    target: str = "A",
    seed: int = 1,
    enrichment: float = 0.4,
) -> list[Pair]:
    """Originals enriched in some residue other than ``target``, paired with
    the instruction asking for high ``target`` content."""
    rng = np.random.default_rng(seed)
    others = [a for a in AMINO_ACIDS if a != target]
    buckets = list(LENGTH_BUCKETS)
    out = []
    for i in range(n):
        residue = others[rng.integers(len(others))]
        bucket = buckets[rng.integers(len(buckets))]
        lo, hi = LENGTH_BUCKETS[bucket]
        seq = sample_sequence(rng, residue, int(rng.integers(lo, hi + 1)), enrichment)
        out.append(Pair(f"EDT{i:05d}", seq, instruction_for(target)))
    return out


def stability_dataset(n: int = 128, seed: int = 2) -> list[tuple[str, float]]:
    """(sequence, score) pairs whose score is linear in residue composition."""
    rng = np.random.default_rng(seed)
    weights = rng.normal(size=len(AMINO_ACIDS))
    out = []
    residues = list(AMINO_ACIDS)
    for _ in range(n):
        residue = residues[rng.integers(len(residues))]
        bucket = list(LENGTH_BUCKETS)[rng.integers(len(LENGTH_BUCKETS))]
        lo, hi = LENGTH_BUCKETS[bucket]
        seq = sample_sequence(rng, residue, int(rng.integers(lo, hi + 1)))
        comp = np.array([seq.count(a) for a in AMINO_ACIDS], dtype=np.float64) / len(seq)
        out.append((seq, float(comp @ weights)))
    return out


def annotation_fixture() -> list[AnnotationRecord]:
    """Ten records: 3 below 40% coverage, 2 at evidence 4, 5 that pass.

    Record P05 sits on both boundaries (coverage exactly 0.4, evidence 3).
    """
    R = AnnotationRecord
    return [
        R("P01", "MKTAYIAKQR", 1, "Kinase A", "Phosphorylates substrates", "Cytoplasm", "Signal transduction", "Belongs to the kinase family"),
        R("P02", "MSTNPKPQRK", 2, "Transporter B", "Moves ions", "Membrane", None, None),
        R("P03", "MAHHHHHHGS", 1, "Orphan C"),
        R("P04", "MGSSHHHHHH", 4, "Enzyme D", "Catalyzes hydrolysis", "Secreted", "Metabolism", "Belongs to the hydrolase family"),
        R("P05", "MLLAVLYCLA", 3, "Receptor E", "Binds ligand"),
        R("P06", "MDEKQVLPRS", 2, None, None, None, None, "Belongs to the globin family"),
        R("P07", "MQIFVKTLTG", 4, "Ubiquitin F", "Tags proteins", None, None, None),
        R("P08", "MKVLAAGIVG", 1, "Channel G", None, "Membrane", "Ion transport", "Belongs to the channel family"),
        R("P09", "MPEPTIDEXX", 2, None, "Unknown function", None, None, None),
        R("P10", "MSAWKLLRGT", 3, "Protease H", "Cleaves peptides", None, "Proteolysis", None),
    ]
