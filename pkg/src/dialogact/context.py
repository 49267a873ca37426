"""Dialog-context features: label history and turn taking.

Label history is either a flat concatenation of one-hot blocks (most recent
first) or the last state of a GRU run over the one-hot sequence. Turn
taking is a vector of speaker-change flags, flat or GRU-summarized.

Histories are integer label arrays covering the whole dialog; entries at or
after the current position are never read by preceding-only contexts.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .diffcore import GRUCell, Module, Tensor, run_cell
from .errors import ConfigError

SOURCES = ("labels_preceding", "labels_future", "turn_taking")
REPRESENTATIONS = ("flat", "summary")
TURN_MODES = ("consecutive", "versus_current")
DEFAULT_MAX_HISTORY = 128


@dataclass(frozen=True)
class ContextConfig:
    source: str
    scope: object = 1
    representation: str = "flat"
    max_history: int = DEFAULT_MAX_HISTORY
    turn_mode: str = "consecutive"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"context source must be one of {SOURCES}, got {self.source!r}")
        if self.representation not in REPRESENTATIONS:
            raise ConfigError(f"context representation must be flat or summary, got {self.representation!r}")
        scope = self.scope
        if isinstance(scope, str) and scope != "all":
            if not scope.isdigit():
                raise ConfigError(f"context scope must be a positive integer or 'all', got {scope!r}")
            scope = int(scope)
        if scope != "all" and (not isinstance(scope, int) or scope < 1):
            raise ConfigError(f"context scope must be a positive integer or 'all', got {self.scope!r}")
        object.__setattr__(self, "scope", scope)
        if self.source == "labels_future" and self.representation == "flat":
            raise ConfigError("future label context is only available as a summary")
        if self.max_history < 1:
            raise ConfigError("max_history must be >= 1")
        if self.turn_mode not in TURN_MODES:
            raise ConfigError(f"turn_mode must be one of {TURN_MODES}, got {self.turn_mode!r}")

    @property
    def key(self):
        return (self.source, self.scope, self.representation)

    @property
    def name(self):
        return f"{self.source}-{self.scope}-{self.representation}"

    @property
    def span(self):
        """Number of history positions a flat vector covers."""
        return self.max_history if self.scope == "all" else self.scope

    @property
    def limit(self):
        """History cap for summaries (``None`` = whole history)."""
        return None if self.scope == "all" else self.scope

    def dim(self, num_labels):
        if self.source == "turn_taking":
            return self.span if self.representation == "flat" else 1
        if self.representation == "flat":
            return self.span * num_labels
        return num_labels


# pure feature functions -------------------------------------------------------

def _check_position(t, length):
    if not 0 <= t < length:
        raise IndexError(f"position {t} outside dialog of length {length}")


def labels_flat(history, t, scope, num_labels, max_history=DEFAULT_MAX_HISTORY):
    """Concatenated one-hots of the labels at t-1, t-2, ... (zeros before the dialog start)."""
    _check_position(t, len(history))
    span = max_history if scope == "all" else int(scope)
    out = np.zeros(span * num_labels)
    for i in range(1, span + 1):
        if t - i < 0:
            break
        out[(i - 1) * num_labels + int(history[t - i])] = 1.0
    return out


def preceding_sequence(history, t, limit=None):
    start = 0 if limit is None else max(0, t - limit)
    return [int(v) for v in history[start:t]]


def following_sequence(history, t, limit=None):
    """Labels after ``t`` in processing order: from the far end back to t+1."""
    stop = len(history) if limit is None else min(len(history), t + 1 + limit)
    return [int(v) for v in history[t + 1:stop]][::-1]


def turn_flags(speakers, t, scope, mode="consecutive", max_history=DEFAULT_MAX_HISTORY):
    """Speaker-change flags, most recent first.

    In ``consecutive`` mode flag i says whether the speakers of t-i+1 and
    t-i differ; in ``versus_current`` mode it compares t with t-i.
    """
    _check_position(t, len(speakers))
    span = max_history if scope == "all" else int(scope)
    out = np.zeros(span)
    for i in range(1, span + 1):
        if t - i < 0:
            break
        ref = speakers[t - i + 1] if mode == "consecutive" else speakers[t]
        out[i - 1] = float(ref != speakers[t - i])
    return out


def flag_sequence(speakers, t, limit=None):
    """Chronological consecutive-change flags for positions up to ``t``."""
    first = 1 if limit is None else max(1, t - limit + 1)
    return [float(speakers[j] != speakers[j - 1]) for j in range(first, t + 1)]


def _one_hot_batch(seqs, width):
    n = len(seqs)
    steps = max((len(s) for s in seqs), default=0)
    x = np.zeros((n, steps, width))
    mask = np.zeros((n, steps), dtype=bool)
    for i, s in enumerate(seqs):
        if s:
            x[i, np.arange(len(s)), s] = 1.0
            mask[i, : len(s)] = True
    return x, mask


def _scalar_batch(seqs):
    n = len(seqs)
    steps = max((len(s) for s in seqs), default=0)
    x = np.zeros((n, steps, 1))
    mask = np.zeros((n, steps), dtype=bool)
    for i, s in enumerate(seqs):
        x[i, : len(s), 0] = s
        mask[i, : len(s)] = True
    return x, mask


def summarize(gru, x, mask):
    """Final GRU state over padded sequences; empty sequences give the zero state."""
    if x.shape[1] == 0:
        return Tensor(np.zeros((x.shape[0], gru.hidden)))
    _, final = run_cell(gru, Tensor(x), mask)
    return final


def labels_summary(history, t, num_labels, gru, scope="all"):
    seq = preceding_sequence(history, t, None if scope == "all" else int(scope))
    x, mask = _one_hot_batch([seq], num_labels)
    return summarize(gru, x, mask).data[0]


def future_summary(history, t, num_labels, gru, scope="all"):
    seq = following_sequence(history, t, None if scope == "all" else int(scope))
    x, mask = _one_hot_batch([seq], num_labels)
    return summarize(gru, x, mask).data[0]


def turn_summary(flags, gru):
    x, mask = _scalar_batch([list(flags)])
    return summarize(gru, x, mask).data[0]


# batched, parameter-owning layer ---------------------------------------------------

@dataclass
class ContextSample:
    """Where a segment sits in its dialog: label history, speakers, position."""

    labels: np.ndarray
    speakers: Sequence[str]
    t: int


class ContextLayer(Module):
    """Builds one configured context feature for a batch of segments."""

    def __init__(self, config, num_labels, rng):
        self.config = config
        self.num_labels = num_labels
        self.dim = config.dim(num_labels)
        if config.representation == "summary":
            in_dim = 1 if config.source == "turn_taking" else num_labels
            self.gru = GRUCell(in_dim, self.dim, rng)
        else:
            self.gru = None

    def __call__(self, samples):
        cfg = self.config
        if cfg.representation == "flat":
            if cfg.source == "labels_preceding":
                rows = [labels_flat(s.labels, s.t, cfg.scope, self.num_labels, cfg.max_history)
                        for s in samples]
            else:
                rows = [turn_flags(s.speakers, s.t, cfg.scope, cfg.turn_mode, cfg.max_history)
                        for s in samples]
            return Tensor(np.stack(rows) if rows else np.zeros((0, self.dim)))
        if cfg.source == "turn_taking":
            x, mask = _scalar_batch([flag_sequence(s.speakers, s.t, cfg.limit) for s in samples])
        elif cfg.source == "labels_preceding":
            x, mask = _one_hot_batch([preceding_sequence(s.labels, s.t, cfg.limit) for s in samples],
                                     self.num_labels)
        else:
            x, mask = _one_hot_batch([following_sequence(s.labels, s.t, cfg.limit) for s in samples],
                                     self.num_labels)
        return summarize(self.gru, x, mask)

    def zeros(self, n):
        return Tensor(np.zeros((n, self.dim)))


def validate_contexts(configs):
    keys = [c.key for c in configs]
    if len(set(keys)) != len(keys):
        raise ConfigError(f"duplicate context configurations: {keys}")
