import numpy as np
import pytest

from seqedit.encoders import EncoderConfig, TransformerEncoder, embed_pooled, encode_protein_feats, similarity
from seqedit.numerics import Tensor
from seqedit.numerics.tensor import ShapeError
from seqedit.tokenize import encode_protein, encode_proteins


@pytest.fixture
def encoder():
    cfg = EncoderConfig(layers=2, model_dim=16, heads=2, max_len=32, projection_dim=8)
    return TransformerEncoder(cfg, np.random.default_rng(0), np.float64)


def test_pooled_embedding_is_unit_norm(encoder):
    ids, mask = encode_proteins(["MKV", "MKVLLAAG"], 32)
    out = encoder(ids, mask)
    assert out.token_features.shape == (2, 32, 16)
    np.testing.assert_allclose(np.linalg.norm(out.pooled_embedding.data, axis=1), 1.0, rtol=1e-12)


def test_padding_does_not_change_embedding(encoder):
    tok = encode_protein("MKVLLA", 32)
    n = tok.true_length
    short = encoder(tok.ids[None, :n], tok.attention_mask[None, :n]).pooled_embedding.data
    full = encode_protein_feats(tok, encoder).pooled_embedding.data
    np.testing.assert_allclose(short, full, atol=1e-12)
    # changing padded ids has no effect either
    ids = tok.ids.copy()
    ids[n:] = 5
    alt = encoder(ids[None], tok.attention_mask[None]).pooled_embedding.data
    np.testing.assert_allclose(alt, full, atol=1e-12)


def test_batch_matches_singletons(encoder):
    seqs = ["MK", "MKVLA", "WWWWWWW"]
    ids, mask = encode_proteins(seqs, 32)
    batch = embed_pooled(encoder, ids, mask, batch_size=2)
    for i, s in enumerate(seqs):
        single = embed_pooled(encoder, *encode_proteins([s], 32))
        np.testing.assert_allclose(batch[i], single[0], atol=1e-12)


def test_rejects_out_of_range_and_overlong_inputs(encoder):
    with pytest.raises(ValueError):
        encoder(np.array([[1, 99, 2]]), np.ones((1, 3), dtype=bool))
    with pytest.raises(ShapeError):
        encoder(np.ones((1, 40), dtype=np.int64), np.ones((1, 40), dtype=bool))


def test_unnormalized_option():
    cfg = EncoderConfig(layers=1, model_dim=8, heads=2, max_len=8, projection_dim=4, normalize=False)
    enc = TransformerEncoder(cfg, np.random.default_rng(1), np.float64)
    out = enc(*encode_proteins(["MKV"], 8)).pooled_embedding.data
    assert not np.isclose(np.linalg.norm(out), 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(model_dim=10, heads=4)
    with pytest.raises(ValueError):
        EncoderConfig(layers=0)


def test_similarity_arrays_and_tensors(rng):
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(3, 4))
    np.testing.assert_allclose(similarity(a, b), (a * b).sum(-1))
    t = similarity(Tensor(a, requires_grad=True), b)
    assert isinstance(t, Tensor) and t.requires_grad
    with pytest.raises(ShapeError):
        similarity(a, rng.normal(size=(3, 5)))
