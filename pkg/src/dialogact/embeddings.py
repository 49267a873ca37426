"""Token representation providers.

Trainable providers own an embedding table and are updated with the
network. Pretrained word vectors and precomputed contextualized vectors
are frozen lookups.
"""

import json

import numpy as np

from .corpus import pad_sequences
from .diffcore import Embedding, Module, Tensor
from .errors import ConfigError, DimensionError, FormatError, MissingVectorsError


class TrainableEmbedding(Module):
    """Randomly initialized lookup table over a token vocabulary.

    Unknown tokens share the trainable unknown row; the padding row stays
    at zero.
    """

    trainable = True

    def __init__(self, level, vocab, dim, rng):
        self.level = level
        self.vocab = vocab
        self.embedding = Embedding(len(vocab), dim, rng)

    @property
    def dim(self):
        return self.embedding.dim

    def ids(self, segments):
        ids, mask, lengths = pad_sequences([self.vocab.encode(s.tokens(self.level)) for s in segments])
        # token-less segments get one zero (padding) row
        empty = lengths == 0
        if empty.any():
            mask[empty, 0] = True
            lengths = np.maximum(lengths, 1)
        return ids, mask, lengths

    def embed_batch(self, segments):
        ids, mask, lengths = self.ids(segments)
        return self.embedding(ids, mask), mask, lengths

    def embed(self, segment):
        out, _, lengths = self.embed_batch([segment])
        return out.data[0, : lengths[0]], int(lengths[0])


class RandomTrainable(TrainableEmbedding):
    def __init__(self, vocab, dim, rng, level="word"):
        super().__init__(level, vocab, dim, rng)


class LemmaTrainable(TrainableEmbedding):
    def __init__(self, vocab, dim, rng):
        super().__init__("lemma", vocab, dim, rng)


class CharTrainable(TrainableEmbedding):
    """Character embeddings sized like a one-hot encoding of the vocabulary."""

    def __init__(self, vocab, rng, dim=None):
        super().__init__("char", vocab, dim or len(vocab), rng)


class PosTrainable(TrainableEmbedding):
    """POS-tag embeddings sized like a one-hot encoding of the tag set."""

    def __init__(self, vocab, rng, level="pos_coarse", dim=None):
        if level not in ("pos_coarse", "pos_fine"):
            raise ConfigError(f"POS embeddings need level pos_coarse or pos_fine, got {level!r}")
        super().__init__(level, vocab, dim or len(vocab), rng)


class FrozenEmbedding(Module):
    trainable = False

    def rows(self, segment):
        raise NotImplementedError

    def embed(self, segment):
        rows = self.rows(segment)
        if rows.shape[1] != self.dim:
            raise DimensionError(f"provider produced {rows.shape[1]}-dim vectors, declared {self.dim}")
        return rows, rows.shape[0]

    def embed_batch(self, segments):
        mats = [self.embed(s)[0] for s in segments]
        lengths = np.array([m.shape[0] for m in mats], dtype=np.int64)
        width = int(lengths.max(initial=1))
        out = np.zeros((len(mats), width, self.dim))
        for i, m in enumerate(mats):
            out[i, : m.shape[0]] = m
        mask = np.arange(width)[None, :] < lengths[:, None]
        return Tensor(out), mask, lengths


class PretrainedLookup(FrozenEmbedding):
    """Fixed word vectors; tokens missing from the table are dropped.

    With ``lowercase_on_miss`` a token that misses is retried lowercased.
    A segment with no known token yields a single zero row.
    """

    def __init__(self, table, dim, level="word", lowercase_on_miss=False):
        self.table = table
        self.dim = dim
        self.level = level
        self.lowercase_on_miss = lowercase_on_miss

    def lookup(self, token):
        vec = self.table.get(token)
        if vec is None and self.lowercase_on_miss:
            vec = self.table.get(token.lower())
        return vec

    def rows(self, segment):
        vecs = [v for v in (self.lookup(t) for t in segment.tokens(self.level)) if v is not None]
        if not vecs:
            return all_tokens_oov_fallback(segment, self)
        return np.stack(vecs)


class ContextualizedPrecomputed(FrozenEmbedding):
    """Per-occurrence vectors read from a :class:`ContextualStore`."""

    def __init__(self, store, level="word"):
        self.store = store
        self.dim = store.dim
        self.level = level

    def rows(self, segment):
        mat = self.store.get(segment.dialog_id, segment.index)
        n = len(segment.tokens(self.level))
        if mat.shape[0] != n:
            raise ConfigError(
                f"contextual vectors for ({segment.dialog_id}, {segment.index}) have "
                f"{mat.shape[0]} rows but the segment has {n} tokens")
        return mat


def embed(segment, provider, level=None):
    """Embed one segment: ``(matrix L' x dim, L')``."""
    if level is not None and level != provider.level:
        raise ConfigError(f"provider is for level {provider.level!r}, not {level!r}")
    if not segment.has_level(provider.level):
        raise ConfigError(
            f"segment ({segment.dialog_id}, {segment.index}) lacks the {provider.level!r} level")
    return provider.embed(segment)


def all_tokens_oov_fallback(segment, provider):
    return np.zeros((1, provider.dim))


def load_pretrained_text(path):
    """Read ``word v1 ... vd`` lines (optional ``count dim`` header).

    Returns ``(table, dim)``; the first occurrence of a word wins.
    """
    table = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                dim = int(parts[1])
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim or dim == 0:
                raise FormatError(f"expected {dim} values, found {len(values)}", path, lineno)
            if word in table:
                continue
            try:
                table[word] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise FormatError(f"non-numeric vector value: {exc}", path, lineno) from exc
    if dim is None:
        raise FormatError("no vectors found", path)
    return table, dim


class ContextualStore:
    """Map ``(dialog_id, segment_index)`` to an ``n x dim`` matrix."""

    def __init__(self, entries, dim):
        self.entries = entries
        self.dim = dim

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def get(self, dialog_id, index):
        try:
            return self.entries[(dialog_id, index)]
        except KeyError:
            raise MissingVectorsError(
                f"no contextual vectors for segment ({dialog_id!r}, {index})") from None

    def check_covers(self, segments):
        for seg in segments:
            self.get(seg.dialog_id, seg.index)


def load_contextual_store(path):
    entries = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (str(rec["dialog_id"]), int(rec["segment_index"]))
                vectors = rec["vectors"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"bad contextual record: {exc}", path, lineno) from exc
            if key in entries:
                raise FormatError(f"duplicate key {key}", path, lineno)
            if not isinstance(vectors, list) or not vectors:
                raise FormatError("'vectors' must be a non-empty list", path, lineno)
            if not all(isinstance(v, list) for v in vectors):
                raise FormatError("'vectors' must be a list of lists", path, lineno)
            width = {len(v) for v in vectors}
            if len(width) != 1 or 0 in width:
                raise FormatError("ragged 'vectors'", path, lineno)
            (w,) = width
            if dim is None:
                dim = w
            elif w != dim:
                raise FormatError(f"vector dimension {w} differs from {dim}", path, lineno)
            entries[key] = np.asarray(vectors, dtype=np.float64)
    if dim is None:
        raise FormatError("no records found", path)
    return ContextualStore(entries, dim)


def sum_layers(layers):
    """Elementwise sum of same-shape matrices (e.g. per-layer exports)."""
    mats = [np.asarray(m, dtype=np.float64) for m in layers]
    if not mats:
        raise DimensionError("sum_layers needs at least one matrix")
    shape = mats[0].shape
    for m in mats[1:]:
        if m.shape != shape:
            raise DimensionError(f"cannot sum layers of shapes {shape} and {m.shape}")
    return np.sum(mats, axis=0)
