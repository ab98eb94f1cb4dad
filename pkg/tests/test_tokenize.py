import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqedit.tokenize import (
    BOS,
    EOS,
    PAD,
    PROTEIN_VOCAB,
    RESERVED,
    UNK,
    IllegalResidue,
    Vocabulary,
    build_text_vocab,
    decode_protein,
    encode_protein,
    encode_proteins,
    encode_text,
    trim,
    words,
)

AA = "ACDEFGHIKLMNPQRSTVWY"


def test_protein_vocab_layout():
    assert len(PROTEIN_VOCAB) == 24
    assert PROTEIN_VOCAB.tokens[:4] == RESERVED
    assert (PAD, BOS, EOS, UNK) == (0, 1, 2, 3)


def test_encode_frames_with_bos_eos_and_mask():
    tok = encode_protein("MKV", max_len=8)
    assert tok.ids.tolist() == [BOS, PROTEIN_VOCAB.id("M"), PROTEIN_VOCAB.id("K"), PROTEIN_VOCAB.id("V"), EOS, 0, 0, 0]
    assert tok.attention_mask.tolist() == [True] * 5 + [False] * 3
    assert tok.true_length == 5


def test_truncation_keeps_eos():
    tok = encode_protein("A" * 20, max_len=6)
    assert tok.ids[-1] == EOS and tok.true_length == 6
    assert decode_protein(tok.ids) == "AAAA"


def test_x_maps_to_unk_and_back():
    tok = encode_protein("MXK", max_len=8)
    assert tok.ids[2] == UNK
    assert decode_protein(tok.ids) == "MXK"


def test_illegal_residue_reports_position():
    with pytest.raises(IllegalResidue) as exc:
        encode_protein("MKBZ")
    assert exc.value.position == 2 and exc.value.char == "B"


def test_round_trip_1000_random_sequences():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        seq = "".join(rng.choice(list(AA + "X"), size=n))
        assert decode_protein(encode_protein(seq, 64).ids) == seq


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=AA + "X", min_size=0, max_size=40))
def test_round_trip_property(seq):
    assert decode_protein(encode_protein(seq, 48).ids) == seq


def test_words_lowercase_and_split():
    assert words("High ALANINE content, short-length!") == ["high", "alanine", "content", "short", "length"]
    assert words("Zn2+ binding") == ["zn2", "binding"]


def test_text_vocab_frequency_then_lexicographic():
    vocab = build_text_vocab(["b a", "c a", "b d"], max_size=3)
    assert vocab.tokens[4:] == ("a", "b", "c")
    tok = encode_text("a d zzz", vocab, max_len=8)
    assert tok.ids[1] == vocab.id("a")
    assert tok.ids[2] == UNK and tok.ids[3] == UNK


def test_vocabulary_save_load(tmp_path):
    vocab = build_text_vocab(["alpha beta", "beta"], 10)
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    assert Vocabulary.load(path) == vocab


def test_vocabulary_requires_reserved_prefix():
    with pytest.raises(ValueError):
        Vocabulary(("a", "b"))


def test_trim_drops_padding_columns():
    ids, mask = encode_proteins(["MK", "MKVL"], 20)
    t_ids, t_mask = trim(ids, mask)
    assert t_ids.shape == (2, 6)
    assert t_mask.sum() == mask.sum()
