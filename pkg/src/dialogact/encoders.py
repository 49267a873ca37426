"""Segment encoders: token-embedding matrix -> fixed-size segment vector.

Every encoder takes a padded batch ``x`` of shape ``(N, L, d)`` plus a
boolean ``mask`` and true ``lengths`` and returns ``(N, out_dim)``.
Padding rows never influence the result.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .diffcore import (
    Dense,
    GRUCell,
    LSTMCell,
    Module,
    Parameter,
    Tensor,
    concat,
    conv1d_maxpool_batch,
    glorot_uniform,
    masked_max,
    mul,
    run_cell,
    stack,
)
from .errors import ConfigError, DimensionError

ENCODER_KINDS = ("maxpool", "cnn", "rnn", "rcnn")
WORD_WINDOWS = (1, 2, 3)
CHAR_WINDOWS = (3, 5, 7)


@dataclass
class EncoderConfig:
    kind: str = "cnn"
    windows: Optional[Tuple[int, ...]] = None
    filters: int = 100
    depth: int = 10
    cell: str = "lstm"
    bidirectional: bool = False
    hidden: Optional[int] = None
    context_dim: int = 200
    proj_dim: int = 200

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ConfigError(f"encoder kind must be one of {ENCODER_KINDS}, got {self.kind!r}")
        if self.windows is not None:
            self.windows = tuple(int(w) for w in self.windows)
            if not self.windows or any(w < 1 for w in self.windows):
                raise ConfigError(f"conv windows must be positive, got {self.windows}")
            if any(a >= b for a, b in zip(self.windows, self.windows[1:])):
                raise ConfigError(f"conv windows must be strictly ascending, got {self.windows}")
        if self.cell not in ("lstm", "gru"):
            raise ConfigError(f"recurrent cell must be 'lstm' or 'gru', got {self.cell!r}")
        for name in ("filters", "depth", "context_dim", "proj_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"encoder {name} must be >= 1")
        if self.hidden is not None and self.hidden < 1:
            raise ConfigError("encoder hidden size must be >= 1")

    def resolved_windows(self, level="word"):
        if self.windows is not None:
            return self.windows
        return CHAR_WINDOWS if level == "char" else WORD_WINDOWS

    def output_dim(self, in_dim, level="word"):
        if self.kind == "maxpool":
            return in_dim
        if self.kind == "cnn":
            return self.filters * len(self.resolved_windows(level))
        if self.kind == "rnn":
            hidden = self.hidden or in_dim
            return hidden * self.depth * (2 if self.bidirectional else 1)
        return self.proj_dim


class SegmentEncoder(Module):
    out_dim: int

    def __call__(self, x, mask, lengths):
        raise NotImplementedError

    def encode(self, matrix):
        """Encode a single ``(L, d)`` matrix; returns a numpy vector."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] < 1:
            raise DimensionError(f"encoder needs a non-empty (L, d) matrix, got shape {matrix.shape}")
        mask = np.ones((1, matrix.shape[0]), dtype=bool)
        out = self(Tensor(matrix[None]), mask, np.array([matrix.shape[0]]))
        return out.data[0]


def _check_nonempty(lengths):
    if np.any(np.asarray(lengths) < 1):
        raise DimensionError("encoders need at least one token per segment")


class MaxPoolEncoder(SegmentEncoder):
    """Componentwise max over the token embeddings."""

    def __init__(self, in_dim):
        self.out_dim = in_dim

    def __call__(self, x, mask, lengths):
        _check_nonempty(lengths)
        return masked_max(x, mask)


class ParallelCnnEncoder(SegmentEncoder):
    """One convolution + max-over-time per window size, concatenated in ascending window order."""

    def __init__(self, in_dim, windows, filters, rng):
        self.windows = tuple(windows)
        self.kernels = []
        self.biases = []
        for w in self.windows:
            self.kernels.append(Parameter(glorot_uniform(rng, w * in_dim, filters, (filters, w, in_dim))))
            self.biases.append(Parameter(np.zeros(filters)))
        self.out_dim = filters * len(self.windows)

    def __call__(self, x, mask, lengths):
        _check_nonempty(lengths)
        x = mul(x, np.asarray(mask, dtype=np.float64)[:, :, None])
        return concat([conv1d_maxpool_batch(x, lengths, k, b)
                       for k, b in zip(self.kernels, self.biases)], axis=-1)


class RecurrentStackEncoder(SegmentEncoder):
    """Stack of recurrent layers; output is every layer's last hidden state.

    Layer k reads the full output sequence of layer k-1. The bidirectional
    variant adds a second stack reading the sequence backwards.
    """

    def __init__(self, in_dim, depth, cell, rng, hidden=None, bidirectional=False):
        hidden = hidden or in_dim
        make = LSTMCell if cell == "lstm" else GRUCell
        self.forward_layers = [make(in_dim if k == 0 else hidden, hidden, rng) for k in range(depth)]
        self.backward_layers = []
        if bidirectional:
            self.backward_layers = [make(in_dim if k == 0 else hidden, hidden, rng) for k in range(depth)]
        self.out_dim = hidden * depth * (2 if bidirectional else 1)

    @staticmethod
    def _run_stack(layers, x, mask, reverse):
        finals = []
        seq = x
        for cell in layers:
            seq, last = run_cell(cell, seq, mask, reverse=reverse)
            finals.append(last)
        return finals

    def __call__(self, x, mask, lengths):
        _check_nonempty(lengths)
        finals = self._run_stack(self.forward_layers, x, mask, False)
        if self.backward_layers:
            finals += self._run_stack(self.backward_layers, x, mask, True)
        return concat(finals, axis=-1)


class RcnnEncoder(SegmentEncoder):
    """Tokens decorated with left/right GRU contexts, projected with tanh, max-pooled.

    The left context of token i is the forward GRU state after tokens
    before i; the right context is the backward GRU state after the tokens
    following i. Both are zero at the segment boundaries.
    """

    def __init__(self, in_dim, context_dim, proj_dim, rng):
        self.left = GRUCell(in_dim, context_dim, rng)
        self.right = GRUCell(in_dim, context_dim, rng)
        self.proj = Dense(in_dim + 2 * context_dim, proj_dim, rng)
        self.context_dim = context_dim
        self.out_dim = proj_dim

    def __call__(self, x, mask, lengths):
        _check_nonempty(lengths)
        n, length = mask.shape
        fwd, _ = run_cell(self.left, x, mask)
        bwd, _ = run_cell(self.right, x, mask, reverse=True)
        zero = Tensor(np.zeros((n, self.context_dim)))
        ys = []
        for i in range(length):
            c_left = fwd[i - 1] if i > 0 else zero
            c_right = bwd[i + 1] if i + 1 < length else zero
            ys.append(self.proj(concat([c_left, x[:, i, :], c_right], axis=-1), activation="tanh"))
        return masked_max(stack(ys, axis=1), mask)


def build_encoder(config, in_dim, rng, level="word"):
    if config.kind == "maxpool":
        return MaxPoolEncoder(in_dim)
    if config.kind == "cnn":
        return ParallelCnnEncoder(in_dim, config.resolved_windows(level), config.filters, rng)
    if config.kind == "rnn":
        return RecurrentStackEncoder(in_dim, config.depth, config.cell, rng,
                                     hidden=config.hidden, bidirectional=config.bidirectional)
    return RcnnEncoder(in_dim, config.context_dim, config.proj_dim, rng)


def encode_maxpool(matrix):
    return MaxPoolEncoder(np.asarray(matrix).shape[1]).encode(matrix)
