import numpy as np
import pytest

from seqedit.numerics import Adam, Tensor, checkpoint, concat, no_grad, stack, warmup_lr, where
from seqedit.numerics import functional as F
from seqedit.numerics.gradcheck import check_gradients, numerical_grad
from seqedit.numerics.layers import (
    NEG_INF,
    DecoderBlock,
    EncoderBlock,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    attention_bias,
)
from seqedit.numerics.tensor import ShapeError, maximum0

TOL = 1e-4


def leaf(rng, *shape, positive=False):
    x = rng.normal(size=shape)
    if positive:
        x = np.abs(x) + 0.5
    return Tensor(x, requires_grad=True)


def weighted(out, rng):
    """Random projection to a scalar so every output entry gets a distinct weight."""
    w = rng.normal(size=out.shape)
    return (out * Tensor(w)).sum()


ELEMENTWISE = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "rsub": lambda a, b: 2.0 - a * b,
    "rdiv": lambda a, b: 1.0 / b + a,
}


@pytest.mark.parametrize("name", sorted(ELEMENTWISE))
def test_binary_ops_gradients_with_broadcasting(name, rng):
    a = leaf(rng, 3, 4)
    b = leaf(rng, 4, positive=True)
    w = rng.normal(size=(3, 4))
    err = check_gradients(lambda: (ELEMENTWISE[name](a, b) * Tensor(w)).sum(), [a, b])
    assert err < TOL


UNARY = {
    "neg": lambda x: -x,
    "pow": lambda x: x**3,
    "exp": lambda x: x.exp(),
    "log": lambda x: x.log(),
    "tanh": lambda x: x.tanh(),
    "relu": lambda x: x.relu(),
    "sqrt": lambda x: x.sqrt(),
    "sum_axis": lambda x: x.sum(axis=0),
    "mean_keep": lambda x: x.mean(axis=1, keepdims=True),
    "reshape": lambda x: x.reshape(6, 2),
    "transpose": lambda x: x.transpose(1, 0),
    "swapaxes": lambda x: x.swapaxes(0, 1),
    "getitem": lambda x: x[np.array([0, 2, 0]), 1:3],
    "softmax": lambda x: F.softmax(x, axis=-1),
    "log_softmax": lambda x: F.log_softmax(x, axis=0),
    "logsumexp": lambda x: F.logsumexp(x, axis=-1),
    "gelu": lambda x: F.gelu(x),
    "l2_normalize": lambda x: F.l2_normalize(x),
    "maximum0": lambda x: maximum0(x),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_ops_gradients(name, rng):
    # keep relu inputs away from the kink so finite differences are valid
    x0 = rng.normal(size=(3, 4))
    x0 = np.where(np.abs(x0) < 0.05, 0.3, x0)
    if name in ("log", "sqrt"):
        x0 = np.abs(x0) + 0.5
    x = Tensor(x0, requires_grad=True)
    probe = rng.normal(size=UNARY[name](Tensor(x0)).shape)
    assert check_gradients(lambda: (UNARY[name](x) * Tensor(probe)).sum(), [x]) < TOL


def test_matmul_batched_gradients(rng):
    a = leaf(rng, 2, 3, 4)
    b = leaf(rng, 4, 5)
    c = leaf(rng, 2, 5, 3)
    probe = rng.normal(size=(2, 3, 3))
    fn = lambda: (((a @ b) @ c) * Tensor(probe)).sum()  # noqa: E731
    assert check_gradients(fn, [a, b, c]) < TOL


def test_concat_stack_where_gradients(rng):
    a, b = leaf(rng, 2, 3), leaf(rng, 2, 3)
    cond = rng.random((2, 3)) > 0.5
    probe1, probe2, probe3 = rng.normal(size=(4, 3)), rng.normal(size=(2, 2, 3)), rng.normal(size=(2, 3))

    def fn():
        return (
            (concat([a, b], axis=0) * Tensor(probe1)).sum()
            + (stack([a, b], axis=1) * Tensor(probe2)).sum()
            + (where(cond, a, b * 2.0) * Tensor(probe3)).sum()
        )

    assert check_gradients(fn, [a, b]) < TOL


def test_layer_norm_gradients(rng):
    x, w, b = leaf(rng, 2, 3, 5), leaf(rng, 5), leaf(rng, 5)
    probe = rng.normal(size=(2, 3, 5))
    assert check_gradients(lambda: (F.layer_norm(x, w, b) * Tensor(probe)).sum(), [x, w, b]) < TOL


def test_embedding_linear_pool_gradients(rng):
    table = leaf(rng, 6, 4)
    w, bias = leaf(rng, 4, 3), leaf(rng, 3)
    ids = np.array([[1, 5, 5, 0], [2, 2, 3, 4]])
    mask = np.array([[1, 1, 1, 0], [1, 1, 0, 0]], dtype=bool)
    probe = rng.normal(size=(2, 3))

    def fn():
        h = F.linear(F.embedding(table, ids), w, bias)
        return (F.masked_mean_pool(h, mask) * Tensor(probe)).sum()

    assert check_gradients(fn, [table, w, bias]) < TOL


def test_cross_entropy_soft_gradients(rng):
    logits = leaf(rng, 3, 4, 6)
    targets = F.smooth_labels(rng.integers(0, 6, size=(3, 4)), 6, 0.1)
    weights = (rng.random((3, 4)) > 0.3).astype(float)
    weights[0, 0] = 1.0
    assert check_gradients(lambda: F.cross_entropy_soft(logits, targets, weights), [logits]) < TOL


def _module_check(module: Module, fn, rng):
    module.cast(np.float64)
    params = module.parameters()
    return check_gradients(fn, params)


def test_attention_encoder_decoder_gradients(rng):
    d, heads = 8, 2
    x = leaf(rng, 2, 4, d)
    mem = leaf(rng, 2, 3, d)
    key_mask = np.array([[1, 1, 1, 0], [1, 1, 0, 0]], dtype=bool)
    mem_mask = np.array([[1, 1, 0], [1, 1, 1]], dtype=bool)
    enc = EncoderBlock(d, heads, rng, np.float64)
    dec = DecoderBlock(d, heads, rng, np.float64)
    probe = rng.normal(size=(2, 4, d))

    def fn():
        h = enc(x, key_mask)
        return (dec(h, mem, mem_mask) * Tensor(probe)).sum()

    assert check_gradients(fn, [x, mem] + enc.parameters() + dec.parameters()) < TOL


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        (x * 2.0).backward()


def test_gradients_accumulate_across_backward_calls():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    (x * 3.0).sum().backward()
    (x * 3.0).sum().backward()
    np.testing.assert_array_equal(x.grad, [6.0, 6.0])


def test_shared_subexpression_counted_twice():
    x = Tensor(np.array(3.0), requires_grad=True)
    y = x * x
    (y + y).backward()
    assert x.grad == pytest.approx(12.0)


def test_no_grad_builds_no_tape():
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = (x * 2.0).sum()
    assert not y.requires_grad and y._parents == ()


def test_broadcast_mismatch_raises():
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((4,)))
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_embedding_rejects_out_of_range_ids():
    with pytest.raises(ShapeError):
        F.embedding(Tensor(np.zeros((4, 2))), np.array([4]))


def test_masked_pool_rejects_empty_rows():
    with pytest.raises(ValueError):
        F.masked_mean_pool(Tensor(np.ones((1, 3, 2))), np.zeros((1, 3), dtype=bool))


def test_softmax_stable_for_large_logits():
    out = F.softmax(Tensor(np.array([[1000.0, 1000.0, -1000.0]]))).data
    np.testing.assert_allclose(out, [[0.5, 0.5, 0.0]])
    assert np.isfinite(F.log_softmax(Tensor(np.array([1e4, 0.0]))).data).all()


def test_masked_keys_get_zero_attention_weight(rng):
    mha = MultiHeadAttention(8, 2, rng, np.float64)
    x = Tensor(rng.normal(size=(1, 4, 8)))
    mask = np.array([[1, 1, 0, 0]], dtype=bool)
    _, w = mha(x, x, key_mask=mask, causal=True, return_weights=True)
    assert np.all(w.data[..., 2:] == 0.0)
    assert np.all(w.data[0, :, 0, 1:] == 0.0)
    np.testing.assert_allclose(w.data.sum(-1), 1.0)


def test_attention_bias_values():
    bias = attention_bias(2, 2, np.array([[1, 0]], dtype=bool), causal=True, dtype=np.float64)
    assert bias.shape == (1, 1, 2, 2)
    assert bias[0, 0, 0, 0] == 0.0 and bias[0, 0, 1, 1] == NEG_INF


def test_gelu_reference_values():
    x = np.array([-1.0, 0.0, 1.0])
    ref = 0.5 * x * (1 + np.tanh(np.sqrt(2 / np.pi) * (x + 0.044715 * x**3)))
    np.testing.assert_allclose(F.gelu(Tensor(x)).data, ref, rtol=1e-12)


def test_layer_norm_output_statistics(rng):
    x = Tensor(rng.normal(3.0, 2.0, size=(4, 16)))
    ln = LayerNorm(16, np.float64)
    y = ln(x).data
    np.testing.assert_allclose(y.mean(-1), 0.0, atol=1e-12)
    np.testing.assert_allclose(y.var(-1), 1.0, rtol=1e-3)


def test_smooth_labels_sum_to_one():
    t = F.smooth_labels(np.array([0, 3]), 5, 0.1)
    np.testing.assert_allclose(t.sum(-1), 1.0)
    assert t[0, 0] == pytest.approx(0.9 + 0.02)


def test_numerical_grad_of_quadratic():
    x = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    g = numerical_grad(lambda: (x * x).sum(), x)
    np.testing.assert_allclose(g, [2.0, -4.0], atol=1e-8)


# -- module plumbing -----------------------------------------------------------


class _Tiny(Module):
    def __init__(self, rng):
        self.fc = Linear(3, 2, rng, np.float64)
        self.extra = [LayerNorm(2, np.float64)]
        self.scale = Parameter(np.ones(1))


def test_named_parameters_and_state_dict_round_trip(rng):
    m = _Tiny(rng)
    names = [n for n, _ in m.named_parameters()]
    assert names == sorted(set(names)) or len(names) == len(set(names))
    assert {"fc.weight", "fc.bias", "extra.0.weight", "extra.0.bias", "scale"} == set(names)
    state = m.state_dict()
    other = _Tiny(np.random.default_rng(99))
    other.load_state_dict(state)
    for k, v in other.state_dict().items():
        np.testing.assert_array_equal(v, state[k])


def test_load_state_dict_rejects_missing_or_misshaped(rng):
    m = _Tiny(rng)
    state = m.state_dict()
    bad = dict(state)
    del bad["scale"]
    with pytest.raises(KeyError):
        m.load_state_dict(bad)
    bad = dict(state)
    bad["scale"] = np.ones(2)
    with pytest.raises(ShapeError):
        m.load_state_dict(bad)


# -- optimizer -----------------------------------------------------------------


def test_warmup_schedule():
    assert warmup_lr(1, 5e-5, 2000) == pytest.approx(5e-5 / 2000)
    assert warmup_lr(2000, 5e-5, 2000) == pytest.approx(5e-5)
    assert warmup_lr(5000, 5e-5, 2000) == pytest.approx(5e-5)
    assert warmup_lr(3, 1e-3, 0) == 1e-3
    with pytest.raises(ValueError):
        warmup_lr(0, 1e-3, 10)


def test_adam_matches_reference_update():
    p = Parameter(np.array([1.0, -1.0]))
    opt = Adam([p], base_lr=0.1, warmup_steps=0)
    g = np.array([0.5, -2.0])
    p.grad = g.copy()
    opt.step()
    # first step: m_hat = g, v_hat = g^2, update = lr * sign(g) (up to eps)
    np.testing.assert_allclose(p.data, [1.0 - 0.1, -1.0 + 0.1], atol=1e-7)


def test_adam_minimizes_quadratic():
    p = Parameter(np.array([3.0, -4.0]))
    opt = Adam([p], base_lr=0.1, warmup_steps=5)
    for _ in range(500):
        opt.zero_grad()
        (p * p).sum().backward()
        opt.step()
    assert np.abs(p.data).max() < 1e-2


def test_adam_raises_on_non_finite_gradient():
    p = Parameter(np.array([1.0]))
    opt = Adam([p], base_lr=0.1, warmup_steps=0)
    p.grad = np.array([np.nan])
    with pytest.raises(FloatingPointError):
        opt.step()


# -- checkpoint ----------------------------------------------------------------


def test_checkpoint_bytes_round_trip(tmp_path, rng):
    tensors = {
        "b.weight": rng.normal(size=(3, 2)).astype(np.float32),
        "a.bias": rng.normal(size=4),
        "ids": np.arange(5, dtype=np.int64),
        "meta.json": checkpoint.pack_json({"x": [1, 2]}),
        "scalar": np.array(2.5),
    }
    blob = checkpoint.dumps(tensors)
    back = checkpoint.loads(blob)
    assert set(back) == set(tensors)
    for k in tensors:
        assert back[k].dtype == tensors[k].dtype
        np.testing.assert_array_equal(back[k], tensors[k])
    assert checkpoint.dumps(back) == blob
    path = tmp_path / "m.ckpt"
    checkpoint.save(path, tensors)
    assert path.read_bytes() == blob
    assert checkpoint.unpack_json(checkpoint.load(path)["meta.json"]) == {"x": [1, 2]}


def test_checkpoint_is_insertion_order_independent(rng):
    a, b = rng.normal(size=2), rng.normal(size=3)
    assert checkpoint.dumps({"a": a, "b": b}) == checkpoint.dumps({"b": b, "a": a})


def test_checkpoint_rejects_corruption():
    blob = checkpoint.dumps({"w": np.ones(3)})
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(b"XXXX" + blob[4:])
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(blob[:-4])
