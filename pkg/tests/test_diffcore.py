import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dialogact.diffcore import (
    Adam,
    GRUCell,
    LSTMCell,
    Parameter,
    SeededRng,
    Tensor,
    adam_step,
    concat,
    conv1d_maxpool,
    dropout,
    grad_check,
    gru_step,
    lstm_step,
    masked_max,
    matmul,
    mean,
    relative_error,
    run_cell,
    softmax,
    softmax_xent,
    softmax_xent_batch,
    stack,
    tensor_sum,
)
from dialogact.diffcore import checkpoint
from dialogact.errors import DimensionError, FormatError, NumericError, ParameterError

finite = st.floats(-20, 20, allow_nan=False, allow_infinity=False)


def param(rng, *shape, scale=0.5):
    return Parameter(rng.normal(shape, scale))


# matmul ---------------------------------------------------------------------

def test_matmul_identity():
    b = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(Tensor(np.eye(2)), Tensor(b)).data, b)


def test_matmul_hand_computed():
    assert matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]])).data.tolist() == [[11.0]]


def test_matmul_zero_matrix():
    out = matmul(Tensor(np.zeros((3, 2))), Tensor(np.arange(8.0).reshape(2, 4)))
    assert not out.data.any()


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 2))))


def test_matmul_backward_reaches_both_operands():
    rng = SeededRng(1)
    a, b = param(rng, 3, 4), param(rng, 4, 2)
    assert grad_check(lambda: tensor_sum(matmul(a, b) * matmul(a, b)), [a, b]) < 1e-6


# conv -----------------------------------------------------------------------

def test_conv_hand_example(kernel_backend):
    out = conv1d_maxpool(Tensor([[1.0], [2.0], [3.0]]), Tensor([[[1.0], [1.0]]]), Tensor([0.0]))
    assert out.data.tolist() == [5.0]


def test_conv_zero_sequence(kernel_backend):
    rng = SeededRng(0)
    out = conv1d_maxpool(Tensor(np.zeros((4, 3))), param(rng, 5, 2, 3), Tensor(np.zeros(5)))
    assert not out.data.any()


def test_conv_length_equals_window(kernel_backend):
    rng = SeededRng(2)
    seq, filt, bias = rng.normal((3, 2)), rng.normal((4, 3, 2)), rng.normal(4)
    expected = np.maximum(np.einsum("fwd,wd->f", filt, seq) + bias, 0.0)
    out = conv1d_maxpool(Tensor(seq), Tensor(filt), Tensor(bias))
    assert np.allclose(out.data, expected, rtol=0, atol=1e-12)


def test_conv_short_sequence_is_zero_padded(kernel_backend):
    rng = SeededRng(3)
    seq, filt, bias = rng.normal((2, 3)), rng.normal((4, 5, 3)), rng.normal(4)
    padded = np.vstack([seq, np.zeros((3, 3))])
    expected = np.maximum(np.einsum("fwd,wd->f", filt, padded) + bias, 0.0)
    out = conv1d_maxpool(Tensor(seq), Tensor(filt), Tensor(bias))
    assert np.allclose(out.data, expected, atol=1e-12)


def test_conv_dimension_mismatch(kernel_backend):
    with pytest.raises(DimensionError):
        conv1d_maxpool(Tensor(np.ones((4, 3))), Tensor(np.ones((2, 2, 2))), Tensor(np.zeros(2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(1, 4), st.integers(1, 4), st.integers(1, 5), st.integers(0, 10_000))
def test_conv_matches_brute_force(length, d, w, f, seed):
    rng = np.random.default_rng(seed)
    seq, filt, bias = rng.normal(size=(length, d)), rng.normal(size=(f, w, d)), rng.normal(size=f)
    padded = np.vstack([seq, np.zeros((max(0, w - length), d))])
    scores = [np.einsum("fwd,wd->f", filt, padded[p:p + w]) + bias for p in range(len(padded) - w + 1)]
    expected = np.maximum(np.max(scores, axis=0), 0.0)
    out = conv1d_maxpool(Tensor(seq), Tensor(filt), Tensor(bias)).data
    assert np.allclose(out, expected, atol=1e-10)


# cells ----------------------------------------------------------------------

def test_lstm_zero_weights():
    x, h, c = Tensor(np.ones(3)), Tensor(np.zeros(2)), Tensor(np.zeros(2))
    h2, c2 = lstm_step(x, h, c, Tensor(np.zeros((3, 8))), Tensor(np.zeros((2, 8))), Tensor(np.zeros(8)))
    assert not h2.data.any() and not c2.data.any()


def test_lstm_gate_values_at_zero():
    # with all-zero affine inputs every sigmoid gate is 0.5; feed c=1 to expose f
    h2, c2 = lstm_step(Tensor(np.zeros(1)), Tensor(np.zeros(1)), Tensor(np.ones(1)),
                       Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 4))), Tensor(np.zeros(4)))
    assert c2.data[0] == pytest.approx(0.5)
    assert h2.data[0] == pytest.approx(0.5 * math.tanh(0.5))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_lstm_hidden_bounded(seed):
    rng = SeededRng(seed)
    # moderate scales keep tanh out of float saturation, where the bound becomes <= 1
    h, c = lstm_step(Tensor(rng.normal(3)), Tensor(rng.normal(4)), Tensor(rng.normal(4, 2.0)),
                     Tensor(rng.normal((3, 16))), Tensor(rng.normal((4, 16))), Tensor(rng.normal(16)))
    assert np.all(np.abs(h.data) < 1.0)


def test_gru_zero_fixed_point():
    out = gru_step(Tensor(np.ones(3)), Tensor(np.zeros(2)), Tensor(np.zeros((3, 6))),
                   Tensor(np.zeros((2, 4))), Tensor(np.zeros((2, 2))), Tensor(np.zeros(6)))
    assert not out.data.any()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_gru_bounded(seed):
    rng = SeededRng(seed)
    h0 = rng.uniform(-0.999, 0.999, 4)
    out = gru_step(Tensor(rng.normal(3)), Tensor(h0), Tensor(rng.normal((3, 12))),
                   Tensor(rng.normal((4, 8))), Tensor(rng.normal((4, 4))), Tensor(rng.normal(12)))
    assert np.all(np.abs(out.data) < 1.0)


def test_gru_convention():
    # hand-built: z from input only, r irrelevant because w_h = 0
    x = np.array([1.0])
    h = np.array([0.4])
    w_x = np.array([[2.0, 0.0, 1.0]])
    out = gru_step(Tensor(x), Tensor(h), Tensor(w_x), Tensor(np.zeros((1, 2))),
                   Tensor(np.zeros((1, 1))), Tensor(np.zeros(3))).data[0]
    z = 1.0 / (1.0 + math.exp(-2.0))
    assert out == pytest.approx((1 - z) * 0.4 + z * math.tanh(1.0), abs=1e-15)


# loss -----------------------------------------------------------------------

def test_xent_uniform_logits():
    probs, loss = softmax_xent(Tensor([0.0, 0.0]), 0)
    assert probs.tolist() == [0.5, 0.5]
    assert float(loss.data) == pytest.approx(math.log(2.0), abs=1e-15)


def test_xent_saturated():
    _, loss = softmax_xent(Tensor([50.0, 0.0]), 0)
    assert 0.0 <= float(loss.data) < 1e-20


def test_xent_target_out_of_range():
    with pytest.raises(IndexError):
        softmax_xent(Tensor([0.0, 1.0]), 2)
    with pytest.raises(IndexError):
        softmax_xent_batch(Tensor(np.zeros((2, 3))), [0, -1])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 5), elements=finite), st.floats(-100, 100))
def test_softmax_rows_sum_to_one_and_shift_invariant(logits, c):
    p = softmax(logits)
    assert np.all(np.abs(p.sum(axis=1) - 1.0) <= 1e-9)
    assert np.allclose(softmax(logits + c), p, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 4), elements=finite), st.lists(st.integers(0, 3), min_size=3, max_size=3),
       st.floats(-50, 50))
def test_xent_nonnegative_and_shift_invariant(logits, targets, c):
    _, loss = softmax_xent_batch(Tensor(logits), targets)
    _, shifted = softmax_xent_batch(Tensor(logits + c), targets)
    assert float(loss.data) >= 0.0
    assert float(shifted.data) == pytest.approx(float(loss.data), abs=1e-9)


# dropout ----------------------------------------------------------------------

def test_dropout_eval_identity():
    x = Tensor(np.arange(6.0))
    assert dropout(x, 0.5, SeededRng(0), training=False) is x


def test_dropout_zero_rate_identity():
    x = Tensor(np.arange(6.0))
    assert np.array_equal(dropout(x, 0.0, SeededRng(0), training=True).data, x.data)


@pytest.mark.parametrize("p", [-0.1, 1.0, 1.5])
def test_dropout_rate_validated(p):
    with pytest.raises(ParameterError):
        dropout(Tensor(np.ones(3)), p, SeededRng(0), training=True)


def test_dropout_monte_carlo_mean():
    rng = SeededRng(11)
    x = Tensor(np.array([1.0, 2.0, 3.0, 4.0]))
    total = np.zeros(4)
    n = 100_000
    for _ in range(n // 1000):
        batch = Tensor(np.broadcast_to(x.data, (1000, 4)).copy())
        total += dropout(batch, 0.5, rng, training=True).data.sum(axis=0)
    estimate = total / n
    assert abs(estimate.mean() - x.data.mean()) / x.data.mean() < 0.01


def test_dropout_survivors_scaled():
    out = dropout(Tensor(np.ones(1000)), 0.25, SeededRng(4), training=True).data
    assert set(np.unique(out)) <= {0.0, 1.0 / 0.75}


# adam -----------------------------------------------------------------------

def test_adam_zero_gradient_identity():
    p = Parameter(np.array([1.0, -2.0]))
    before = p.data.copy()
    adam_step(p, np.zeros(2))
    assert np.array_equal(p.data, before) and p.step == 1


def test_adam_first_step_is_signed_lr():
    for g in (3.0, -0.02):
        p = Parameter(np.array([0.5]))
        adam_step(p, np.array([g]), lr=1e-3)
        assert p.data[0] - 0.5 == pytest.approx(-1e-3 * math.copysign(1.0, g), rel=1e-4)


def test_adam_symmetry():
    a, b = Parameter(np.array([0.3, 0.1])), Parameter(np.array([0.3, 0.1]))
    for g in ([1.0, -2.0], [0.5, 0.5]):
        adam_step(a, np.array(g))
        adam_step(b, np.array(g))
    assert np.array_equal(a.data, b.data)


def test_adam_shape_mismatch():
    with pytest.raises(DimensionError):
        adam_step(Parameter(np.zeros(2)), np.zeros(3))


def test_adam_optimizer_steps_every_parameter():
    a, b = Parameter(np.ones(2)), Parameter(np.ones(3))
    opt = Adam([a, b])
    tensor_sum(a * a).backward()
    opt.step()
    assert a.step == b.step == 1
    assert np.array_equal(b.data, np.ones(3))


# grad_check -------------------------------------------------------------------

def test_grad_check_square():
    x = Parameter(np.array([3.0]))
    x.zero_grad()
    tensor_sum(x * x).backward()
    assert x.grad[0] == 6.0
    assert grad_check(lambda: tensor_sum(x * x), [x]) < 1e-9


def test_grad_check_linear_exact():
    x = Parameter(np.array([1.0, -2.0, 0.5]))
    assert grad_check(lambda: tensor_sum(x * np.array([2.0, 3.0, -1.0])), [x]) < 1e-9


def test_grad_check_non_finite():
    x = Parameter(np.array([np.inf]))
    with pytest.raises(NumericError):
        grad_check(lambda: tensor_sum(x * x), [x])


def test_relative_error_floor():
    assert relative_error(0.0, 1e-12) == pytest.approx(1e-4)


# structural ops ---------------------------------------------------------------

def test_concat_routes_gradient_slices():
    rng = SeededRng(5)
    a, b = param(rng, 2, 3), param(rng, 2, 2)
    w = rng.normal((2, 5))

    def grads(a_data):
        a.data[...] = a_data
        a.zero_grad(), b.zero_grad()
        tensor_sum(concat([a, b], axis=1) * w).backward()
        return a.grad.copy(), b.grad.copy()

    ga, gb = grads(a.data.copy())
    assert np.array_equal(ga, w[:, :3]) and np.array_equal(gb, w[:, 3:])
    _, gb2 = grads(a.data + 1.0)
    assert np.array_equal(gb, gb2)


def test_concat_shape_error():
    with pytest.raises(DimensionError):
        concat([Tensor(np.ones((2, 3))), Tensor(np.ones((3, 3)))], axis=1)


def test_masked_max_ignores_masked_rows():
    a = Tensor(np.array([[[1.0, 5.0], [9.0, 9.0], [2.0, 0.0]]]))
    out = masked_max(a, np.array([[True, False, True]]))
    assert out.data.tolist() == [[2.0, 5.0]]


def test_structural_gradients():
    rng = SeededRng(8)
    a, b = param(rng, 2, 3), param(rng, 2, 3)
    mask = np.array([[True, True], [True, False]])
    assert grad_check(lambda: tensor_sum(masked_max(stack([a, b], axis=1), mask)), [a, b]) < 1e-6
    assert grad_check(lambda: mean(a[:, 1:] * b[:, :2]), [a, b]) < 1e-6


# recurrent runner -----------------------------------------------------------

@pytest.mark.parametrize("cell_cls", [LSTMCell, GRUCell])
@pytest.mark.parametrize("reverse", [False, True])
def test_run_cell_gradients(cell_cls, reverse):
    rng = SeededRng(9)
    cell = cell_cls(3, 2, rng)
    x = param(rng, 2, 4, 3)
    mask = np.array([[1, 1, 1, 0], [1, 1, 0, 0]], dtype=bool)
    loss = lambda: tensor_sum(run_cell(cell, x, mask, reverse=reverse)[1])
    assert grad_check(loss, [x] + cell.parameters()) < 1e-4


def test_run_cell_trailing_padding_bit_exact():
    rng = SeededRng(10)
    cell = LSTMCell(3, 4, rng)
    x = rng.normal((2, 3, 3))
    mask = np.array([[1, 1, 1], [1, 0, 0]], dtype=bool)
    _, h = run_cell(cell, Tensor(x), mask)
    xp = np.concatenate([x, rng.normal((2, 2, 3))], axis=1)
    mp = np.concatenate([mask, np.zeros((2, 2), dtype=bool)], axis=1)
    _, hp = run_cell(cell, Tensor(xp), mp)
    assert np.array_equal(h.data, hp.data)


# rng / checkpoint -------------------------------------------------------------

def test_rng_determinism():
    a, b = SeededRng(42), SeededRng(42)
    assert np.array_equal(a.uniform(0, 1, 5), b.uniform(0, 1, 5))
    assert np.array_equal(a.permutation(10), b.permutation(10))
    assert np.array_equal(a.spawn(3).random(4), b.spawn(3).random(4))
    assert not np.array_equal(SeededRng(1).random(4), SeededRng(2).random(4))


def test_checkpoint_roundtrip(tmp_path):
    rng = SeededRng(0)
    named = {"w": param(rng, 2, 3), "b": param(rng, 3)}
    path = tmp_path / "ck.json"
    checkpoint.save(path, named, {"note": "x"})
    fresh = {"w": Parameter(np.zeros((2, 3))), "b": Parameter(np.zeros(3))}
    doc = checkpoint.read(path)
    checkpoint.restore(fresh, doc["parameters"], path)
    assert doc["meta"] == {"note": "x"}
    assert all(np.array_equal(fresh[k].data, named[k].data) for k in named)


def test_checkpoint_restore_is_atomic(tmp_path):
    rng = SeededRng(0)
    named = {"a": param(rng, 2), "b": param(rng, 3)}
    path = tmp_path / "ck.json"
    checkpoint.save(path, named)
    target = {"a": Parameter(np.zeros(2)), "b": Parameter(np.zeros(4))}
    with pytest.raises(FormatError, match="parameter b"):
        checkpoint.restore(target, checkpoint.read(path)["parameters"], path)
    assert not target["a"].data.any()


def test_checkpoint_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope", encoding="utf-8")
    with pytest.raises(FormatError):
        checkpoint.read(path)
