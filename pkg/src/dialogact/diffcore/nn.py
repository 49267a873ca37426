"""Parameter-owning layers and masked recurrent sequence runners."""

import numpy as np

from . import functional as F
from .tensor import Parameter, Tensor, as_tensor, embedding_lookup, linear, relu, tanh, where


class Module:
    """Container that collects :class:`Parameter` attributes and child modules by name."""

    def named_parameters(self, prefix=""):
        out = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Parameter):
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(key + "."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{key}.{i}."))
                    elif isinstance(item, Parameter):
                        out[f"{key}.{i}"] = item
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


class Dense(Module):
    def __init__(self, in_dim, out_dim, rng):
        self.weight = Parameter(F.glorot_uniform(rng, in_dim, out_dim))
        self.bias = Parameter(np.zeros(out_dim))

    @property
    def in_dim(self):
        return self.weight.shape[0]

    @property
    def out_dim(self):
        return self.weight.shape[1]

    def __call__(self, x, activation=None):
        y = linear(x, self.weight, self.bias)
        if activation == "relu":
            return relu(y)
        if activation == "tanh":
            return tanh(y)
        return y


class Embedding(Module):
    """Trainable lookup table; row 0 is padding and never receives updates."""

    def __init__(self, vocab_size, dim, rng, pad_index=0):
        table = F.glorot_uniform(rng, vocab_size, dim)
        if pad_index is not None:
            table[pad_index] = 0.0
        self.table = Parameter(table)
        if pad_index is not None:
            self.table.frozen_rows = [pad_index]

    @property
    def dim(self):
        return self.table.shape[1]

    def __call__(self, ids, mask=None):
        return embedding_lookup(self.table, ids, mask)


class LSTMCell(Module):
    def __init__(self, in_dim, hidden, rng):
        self.hidden = hidden
        self.w_x = Parameter(F.glorot_uniform(rng, in_dim, 4 * hidden))
        self.w_h = Parameter(F.glorot_uniform(rng, hidden, 4 * hidden))
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        self.b = Parameter(b)

    def initial_state(self, n):
        z = Tensor(np.zeros((n, self.hidden)))
        return (z, z)

    def step(self, x, state):
        h, c = F.lstm_step(x, state[0], state[1], self.w_x, self.w_h, self.b)
        return h, (h, c)


class GRUCell(Module):
    def __init__(self, in_dim, hidden, rng):
        self.hidden = hidden
        self.w_x = Parameter(F.glorot_uniform(rng, in_dim, 3 * hidden))
        self.w_zr = Parameter(F.glorot_uniform(rng, hidden, 2 * hidden))
        self.w_h = Parameter(F.glorot_uniform(rng, hidden, hidden))
        self.b = Parameter(np.zeros(3 * hidden))

    def initial_state(self, n):
        return Tensor(np.zeros((n, self.hidden)))

    def step(self, x, state):
        h = F.gru_step(x, state, self.w_x, self.w_zr, self.w_h, self.b)
        return h, h


def _keep(state, new, m):
    if isinstance(state, tuple):
        return tuple(where(m, a, b) for a, b in zip(new, state))
    return where(m, new, state)


def run_cell(cell, inputs, mask, reverse=False):
    """Run ``cell`` over a padded sequence.

    ``inputs`` is a list of ``(N, d)`` tensors (one per time step) or an
    ``(N, L, d)`` tensor; ``mask`` is ``(N, L)`` boolean. At masked steps the
    state is carried through unchanged, so trailing padding never alters
    results. With ``reverse`` the sequence is consumed from the last step.

    Returns ``(outputs, final_hidden)`` where ``outputs[t]`` is the hidden
    state after consuming step ``t`` (in original time order).
    """
    if isinstance(inputs, Tensor):
        steps = [inputs[:, t, :] for t in range(inputs.shape[1])]
    else:
        steps = [as_tensor(x) for x in inputs]
    mask = np.asarray(mask, dtype=bool)
    n, length = mask.shape
    state = cell.initial_state(n)
    outputs = [None] * length
    order = range(length - 1, -1, -1) if reverse else range(length)
    for t in order:
        _, new = cell.step(steps[t], state)
        state = _keep(state, new, mask[:, t:t + 1])
        outputs[t] = state[0] if isinstance(state, tuple) else state
    final = state[0] if isinstance(state, tuple) else state
    if length == 0:
        final = cell.initial_state(n)
        final = final[0] if isinstance(final, tuple) else final
    return outputs, final
