"""Differentiable layers built on :mod:`.tensor`: convolution, recurrent
cells, loss and dropout."""

import numpy as np

from ..errors import DimensionError, ParameterError
from . import kernels
from .tensor import (
    DTYPE,
    Parameter,
    Tensor,
    _result,
    add,
    as_tensor,
    concat,
    dropout_mask,
    linear,
    matmul,
    mul,
    reshape,
    sigmoid,
    tanh,
)


def conv1d_maxpool_batch(x, lengths, filters, bias):
    """Convolution with relu and max-over-time for a padded batch.

    ``x`` is ``(N, L, d)`` with zero rows past each true length. Sequences
    shorter than the window are treated as right-padded with zero rows to
    the window length. Returns ``(N, F)``.
    """
    x, filters, bias = as_tensor(x), as_tensor(filters), as_tensor(bias)
    if filters.ndim != 3 or x.ndim != 3 or x.shape[2] != filters.shape[2]:
        raise DimensionError(
            f"conv input shape {x.shape} does not match filter shape {filters.shape}"
        )
    w = filters.shape[1]
    xd = x.data
    if xd.shape[1] < w:
        xd = np.concatenate([xd, np.zeros((xd.shape[0], w - xd.shape[1], xd.shape[2]))], axis=1)
    xd = np.ascontiguousarray(xd)
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    kern = kernels.get()
    out, arg = kern.conv_maxpool_forward(xd, lengths, filters.data, np.ascontiguousarray(bias.data))

    def backward(g):
        dx, dw, db = kern.conv_maxpool_backward(
            np.ascontiguousarray(g), xd, filters.data, out, arg)
        return ((x, dx[:, : x.shape[1], :]), (filters, dw), (bias, db))

    return _result(out, (x, filters, bias), backward)


def conv1d_maxpool(seq, filters, bias):
    """Single-sequence form: ``seq`` is ``(L, d)``, returns ``(F,)``."""
    seq = as_tensor(seq)
    if seq.ndim != 2:
        raise DimensionError(f"expected an (L, d) sequence, got {seq.shape}")
    if seq.shape[0] < 1:
        raise DimensionError("conv1d_maxpool needs at least one row")
    batch = reshape(seq, (1,) + seq.shape)
    out = conv1d_maxpool_batch(batch, np.array([seq.shape[0]]), filters, bias)
    return reshape(out, (out.shape[1],))


# recurrent cells --------------------------------------------------------------

def lstm_step(x, h, c, w_x, w_h, b):
    """One LSTM step.

    Gate blocks in ``w_x`` (d, 4H), ``w_h`` (H, 4H) and ``b`` (4H,) are
    ordered input, forget, candidate, output.
    """
    hsz = h.shape[-1]
    if w_x.shape[1] != 4 * hsz or w_h.shape != (hsz, 4 * hsz):
        raise DimensionError(
            f"lstm weights {w_x.shape}/{w_h.shape} inconsistent with hidden size {hsz}")
    z = add(add(matmul(x, w_x), matmul(h, w_h)), b)
    i = sigmoid(z[..., 0:hsz])
    f = sigmoid(z[..., hsz:2 * hsz])
    g = tanh(z[..., 2 * hsz:3 * hsz])
    o = sigmoid(z[..., 3 * hsz:4 * hsz])
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def gru_step(x, h, w_x, w_zr, w_h, b):
    """One GRU step.

    ``w_x`` (d, 3H) holds the input weights for update, reset and candidate;
    ``w_zr`` (H, 2H) the recurrent weights for update and reset; ``w_h``
    (H, H) the recurrent candidate weights applied to ``r * h``.
    """
    hsz = h.shape[-1]
    if w_x.shape[1] != 3 * hsz or w_zr.shape != (hsz, 2 * hsz) or w_h.shape != (hsz, hsz):
        raise DimensionError(
            f"gru weights {w_x.shape}/{w_zr.shape}/{w_h.shape} inconsistent with hidden size {hsz}")
    xp = add(matmul(x, w_x), b)
    hp = matmul(h, w_zr)
    z = sigmoid(add(xp[..., 0:hsz], hp[..., 0:hsz]))
    r = sigmoid(add(xp[..., hsz:2 * hsz], hp[..., hsz:2 * hsz]))
    cand = tanh(add(xp[..., 2 * hsz:3 * hsz], matmul(mul(r, h), w_h)))
    return add(mul(1.0 - z, h), mul(z, cand))


# loss -------------------------------------------------------------------------

def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent_batch(logits, targets):
    """Mean categorical cross-entropy of ``(N, C)`` logits against class ids.

    Returns ``(probs, loss)`` where ``loss`` is a scalar tensor.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    n, c = logits.shape
    if targets.shape != (n,):
        raise DimensionError(f"targets shape {targets.shape} does not match logits {logits.shape}")
    if np.any(targets < 0) or np.any(targets >= c):
        raise IndexError(f"target index out of range [0, {c})")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted - logsum[:, None]
    probs = np.exp(logp)
    loss = -logp[np.arange(n), targets].mean()

    def backward(g):
        grad = probs.copy()
        grad[np.arange(n), targets] -= 1.0
        return ((logits, grad * (g / n)),)

    return probs, _result(np.asarray(loss), (logits,), backward)


def softmax_xent(logits, target):
    """Single-vector form: ``(probs, loss)`` for a length-C logit vector."""
    logits = as_tensor(logits)
    if logits.ndim != 1:
        raise DimensionError(f"expected a logit vector, got {logits.shape}")
    c = logits.shape[0]
    if not 0 <= int(target) < c:
        raise IndexError(f"target {target} out of range [0, {c})")
    probs, loss = softmax_xent_batch(reshape(logits, (1, c)), [int(target)])
    return probs[0], loss


def dropout(x, p, rng, training):
    """Inverted dropout: zero with probability ``p`` and rescale survivors."""
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {p}")
    x = as_tensor(x)
    if not training or p == 0.0:
        return x
    keep = rng.random(x.shape) >= p
    return dropout_mask(x, keep, 1.0 / (1.0 - p))


def glorot_uniform(rng, fan_in, fan_out, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape or (fan_in, fan_out))


def dense(x, weight, bias):
    return linear(x, weight, bias)


__all__ = [
    "DTYPE",
    "Parameter",
    "Tensor",
    "concat",
    "conv1d_maxpool",
    "conv1d_maxpool_batch",
    "dense",
    "dropout",
    "glorot_uniform",
    "gru_step",
    "lstm_step",
    "softmax",
    "softmax_xent",
    "softmax_xent_batch",
]
