import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialogact.diffcore import Parameter, SeededRng, Tensor, grad_check, tensor_sum
from dialogact.encoders import (
    EncoderConfig,
    MaxPoolEncoder,
    ParallelCnnEncoder,
    RcnnEncoder,
    RecurrentStackEncoder,
    build_encoder,
    encode_maxpool,
)
from dialogact.errors import ConfigError, DimensionError


def batch(rng, lengths, d):
    n, width = len(lengths), max(lengths)
    x = rng.normal((n, width, d))
    mask = np.arange(width)[None, :] < np.asarray(lengths)[:, None]
    x = x * mask[:, :, None]
    return x, mask, np.asarray(lengths)


def pad_more(x, mask, extra, rng):
    n, _, d = x.shape
    # garbage in padded slots must not matter either
    x2 = np.concatenate([x, rng.normal((n, extra, d))], axis=1)
    m2 = np.concatenate([mask, np.zeros((n, extra), dtype=bool)], axis=1)
    x2[~m2] = rng.normal((int((~m2).sum()), d))
    return x2, m2


def all_encoders(d, rng):
    return {
        "maxpool": MaxPoolEncoder(d),
        "cnn": ParallelCnnEncoder(d, (1, 2, 3), 4, rng),
        "lstm": RecurrentStackEncoder(d, 3, "lstm", rng),
        "bigru": RecurrentStackEncoder(d, 2, "gru", rng, hidden=3, bidirectional=True),
        "rcnn": RcnnEncoder(d, 3, 5, rng),
    }


# maxpool ---------------------------------------------------------------------

def test_maxpool_single_row():
    assert encode_maxpool([[1.5, -2.0]]).tolist() == [1.5, -2.0]


def test_maxpool_two_rows():
    assert encode_maxpool([[1.0, 0.0], [0.0, 1.0]]).tolist() == [1.0, 1.0]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 10_000))
def test_maxpool_permutation_invariant(length, d, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(length, d))
    assert np.array_equal(encode_maxpool(m), encode_maxpool(m[rng.permutation(length)]))
    assert np.array_equal(encode_maxpool(m), m.max(axis=0))


def test_empty_sequence_rejected():
    rng = SeededRng(0)
    for enc in all_encoders(2, rng).values():
        with pytest.raises(DimensionError):
            enc.encode(np.zeros((0, 2)))


# parallel cnn ----------------------------------------------------------------

def test_cnn_output_dim_default_configuration():
    enc = build_encoder(EncoderConfig(kind="cnn"), 200, SeededRng(0))
    assert enc.out_dim == 300
    assert enc.encode(np.ones((4, 200))).shape == (300,)


def test_cnn_char_windows_default():
    assert EncoderConfig().resolved_windows("char") == (3, 5, 7)
    assert EncoderConfig().resolved_windows("word") == (1, 2, 3)


def test_cnn_basis_filter_is_coordinate_max(kernel_backend):
    enc = ParallelCnnEncoder(3, (1,), 1, SeededRng(0))
    enc.kernels[0].data[...] = np.array([[[0.0, 1.0, 0.0]]])
    m = np.array([[0.0, 0.2, 9.0], [1.0, 0.7, 0.0], [5.0, -1.0, 2.0]])
    assert enc.encode(m).tolist() == [0.7]


def test_cnn_translation_invariance(kernel_backend):
    rng = SeededRng(1)
    enc = ParallelCnnEncoder(2, (2,), 3, rng)
    pattern = np.array([[1.0, 2.0], [-1.0, 0.5]])
    a = np.zeros((6, 2))
    b = np.zeros((6, 2))
    a[1:3] = pattern
    b[3:5] = pattern
    assert np.array_equal(enc.encode(a), enc.encode(b))


@pytest.mark.parametrize("windows", [(0, 1), (2, 2), (3, 1), ()])
def test_windows_validated(windows):
    with pytest.raises(ConfigError):
        EncoderConfig(windows=windows)


# recurrent stack ---------------------------------------------------------------

def test_recurrent_output_dims():
    rng = SeededRng(0)
    assert RecurrentStackEncoder(8, 10, "lstm", rng).encode(np.ones((3, 8))).shape == (80,)
    assert RecurrentStackEncoder(8, 2, "gru", rng, bidirectional=True).out_dim == 32


def test_recurrent_depth1_length1_is_one_cell_step():
    rng = SeededRng(2)
    enc = RecurrentStackEncoder(3, 1, "lstm", rng)
    x = rng.normal((1, 3))
    cell = enc.forward_layers[0]
    h, _ = cell.step(Tensor(x), cell.initial_state(1))
    assert np.array_equal(enc.encode(x), h.data[0])


@pytest.mark.parametrize("cell", ["lstm", "gru"])
def test_recurrent_zero_weights_zero_output(cell):
    enc = RecurrentStackEncoder(4, 3, cell, SeededRng(0))
    for p in enc.parameters():
        p.data[...] = 0.0
    assert not enc.encode(SeededRng(1).normal((5, 4))).any()


def test_recurrent_order_sensitive():
    enc = RecurrentStackEncoder(2, 1, "lstm", SeededRng(3))
    m = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, -1.0]])
    assert not np.allclose(enc.encode(m), enc.encode(m[::-1]))


def test_layers_consume_full_sequences():
    # layer 2's final state differs when layer 1's intermediate outputs change
    rng = SeededRng(4)
    enc = RecurrentStackEncoder(2, 2, "gru", rng)
    a = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
    b = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert not np.allclose(enc.encode(a)[2:], enc.encode(b)[2:])


# rcnn -----------------------------------------------------------------------

def test_rcnn_dims_default_configuration():
    enc = build_encoder(EncoderConfig(kind="rcnn"), 10, SeededRng(0))
    assert enc.proj.in_dim == 10 + 400 and enc.out_dim == 200


def test_rcnn_single_token_uses_zero_contexts():
    rng = SeededRng(5)
    enc = RcnnEncoder(3, 2, 4, rng)
    e = rng.normal((1, 3))
    w, b = enc.proj.weight.data, enc.proj.bias.data
    expected = np.tanh(np.concatenate([np.zeros(2), e[0], np.zeros(2)]) @ w + b)
    assert np.allclose(enc.encode(e), expected, atol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_rcnn_output_bounded(length, seed):
    rng = SeededRng(seed)
    enc = RcnnEncoder(3, 2, 4, rng)
    assert np.all(np.abs(enc.encode(rng.normal((length, 3)))) < 1.0)


# shared invariants ----------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=4), st.integers(1, 3), st.integers(0, 10_000))
def test_padding_invariance_bit_exact(lengths, extra, seed):
    rng = SeededRng(seed)
    x, mask, lens = batch(rng, lengths, 3)
    x2, m2 = pad_more(x, mask, extra, rng)
    for name, enc in all_encoders(3, SeededRng(seed + 1)).items():
        a = enc(Tensor(x), mask, lens).data
        b = enc(Tensor(x2), m2, lens).data
        assert np.array_equal(a, b), name


def test_batch_rows_match_single_encoding():
    rng = SeededRng(6)
    x, mask, lens = batch(rng, [2, 5, 3], 3)
    for name, enc in all_encoders(3, SeededRng(7)).items():
        out = enc(Tensor(x), mask, lens).data
        for i, n in enumerate(lens):
            assert np.allclose(out[i], enc.encode(x[i, :n]), atol=1e-12), name


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["maxpool", "cnn", "rnn", "rcnn"]), st.integers(1, 12), st.integers(1, 3),
       st.integers(1, 5), st.booleans(), st.sampled_from(["word", "char"]))
def test_output_dim_is_pure_function_of_config(kind, d, depth, filters, bi, level):
    cfg = EncoderConfig(kind=kind, depth=depth, filters=filters, bidirectional=bi,
                        context_dim=2, proj_dim=3)
    enc = build_encoder(cfg, d, SeededRng(0), level)
    assert enc.out_dim == cfg.output_dim(d, level)
    assert enc.encode(np.ones((2, d))).shape == (cfg.output_dim(d, level),)


@pytest.mark.parametrize("name", ["maxpool", "cnn", "lstm", "bigru", "rcnn"])
def test_encoder_gradients(name, kernel_backend):
    rng = SeededRng(12)
    enc = all_encoders(3, rng)[name]
    x, mask, lens = batch(rng, [3, 1, 4], 3)
    xp = Parameter(x)
    w = rng.normal((3, enc.out_dim))
    loss = lambda: tensor_sum(enc(xp, mask, lens) * w)
    assert grad_check(loss, [xp] + enc.parameters()) < 1e-4
