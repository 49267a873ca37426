"""Network assembly: token channels, context features, reduction and output layers."""

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional


from .context import ContextConfig, ContextLayer, validate_contexts
from .corpus import LEVELS
from .diffcore import Dense, Module, concat, dropout
from .embeddings import (
    CharTrainable,
    ContextualizedPrecomputed,
    LemmaTrainable,
    PosTrainable,
    PretrainedLookup,
    RandomTrainable,
    load_contextual_store,
    load_pretrained_text,
)
from .encoders import EncoderConfig, build_encoder
from .errors import ConfigError

EMBEDDING_KINDS = ("random", "pretrained", "contextual")
DEFAULT_WORD_DIM = 200


@dataclass
class ChannelConfig:
    level: str = "word"
    embedding: str = "random"
    dim: Optional[int] = None
    path: Optional[str] = None
    lowercase_on_miss: bool = False
    encoder: EncoderConfig = field(default_factory=EncoderConfig)

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ConfigError(f"channel level must be one of {LEVELS}, got {self.level!r}")
        if self.embedding not in EMBEDDING_KINDS:
            raise ConfigError(f"embedding must be one of {EMBEDDING_KINDS}, got {self.embedding!r}")
        if self.embedding != "random" and self.level not in ("word",):
            raise ConfigError(f"{self.embedding} embeddings are only available for the word level")
        if self.embedding != "random" and not self.path:
            raise ConfigError(f"{self.embedding} embeddings need a 'path'")
        if self.dim is not None and self.dim < 1:
            raise ConfigError("embedding dim must be >= 1")


@dataclass
class ModelConfig:
    channels: List[ChannelConfig] = field(default_factory=lambda: [ChannelConfig()])
    contexts: List[ContextConfig] = field(default_factory=list)
    reduction_dim: int = 100
    dropout: float = 0.5

    def __post_init__(self):
        if not self.channels:
            raise ConfigError("a model needs at least one channel")
        levels = [c.level for c in self.channels]
        if len(set(levels)) != len(levels):
            raise ConfigError(f"channel levels must be distinct, got {levels}")
        validate_contexts(self.contexts)
        if self.reduction_dim < 1:
            raise ConfigError("reduction_dim must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")

    @property
    def uses_future(self):
        return any(c.source == "labels_future" for c in self.contexts)


class Resources:
    """Cache of frozen embedding resources keyed by path."""

    def __init__(self):
        self._tables = {}
        self._stores = {}

    def pretrained(self, path):
        if path not in self._tables:
            self._tables[path] = load_pretrained_text(path)
        return self._tables[path]

    def contextual(self, path):
        if path not in self._stores:
            self._stores[path] = load_contextual_store(path)
        return self._stores[path]


def build_provider(channel, vocabs, rng, resources):
    if channel.embedding == "pretrained":
        table, dim = resources.pretrained(channel.path)
        return PretrainedLookup(table, dim, level=channel.level,
                                lowercase_on_miss=channel.lowercase_on_miss)
    if channel.embedding == "contextual":
        return ContextualizedPrecomputed(resources.contextual(channel.path), level=channel.level)
    vocab = vocabs.get(channel.level)
    if vocab is None:
        raise ConfigError(f"level {channel.level!r} is not annotated on the training data")
    if channel.level == "char":
        return CharTrainable(vocab, rng, dim=channel.dim)
    if channel.level in ("pos_coarse", "pos_fine"):
        return PosTrainable(vocab, rng, level=channel.level, dim=channel.dim)
    if channel.level == "lemma":
        return LemmaTrainable(vocab, channel.dim or DEFAULT_WORD_DIM, rng)
    return RandomTrainable(vocab, channel.dim or DEFAULT_WORD_DIM, rng)


class Channel(Module):
    def __init__(self, config, provider, encoder):
        self.config = config
        self.provider = provider
        self.encoder = encoder

    def __call__(self, segments):
        x, mask, lengths = self.provider.embed_batch(segments)
        return self.encoder(x, mask, lengths)


class DialogActModel(Module):
    """Channels -> concat(+ context) -> relu reduction -> dropout -> logits."""

    def __init__(self, config, vocabs, rng, resources=None):
        resources = resources or Resources()
        self.config = config
        self.labels = vocabs["label"]
        self.num_labels = len(self.labels)
        self.channels = []
        for ch in config.channels:
            provider = build_provider(ch, vocabs, rng, resources)
            encoder = build_encoder(ch.encoder, provider.dim, rng, ch.level)
            self.channels.append(Channel(ch, provider, encoder))
        self.contexts = [ContextLayer(c, self.num_labels, rng) for c in config.contexts]
        self.segment_dim = sum(c.encoder.out_dim for c in self.channels)
        self.context_dim = sum(c.dim for c in self.contexts)
        self.reduce = Dense(self.segment_dim + self.context_dim, config.reduction_dim, rng)
        self.output = Dense(config.reduction_dim, self.num_labels, rng)

    @property
    def levels(self):
        return [c.config.level for c in self.channels]

    def check_segment(self, segment):
        for level in self.levels:
            if not segment.has_level(level):
                raise ConfigError(
                    f"segment ({segment.dialog_id}, {segment.index}) is missing the {level!r} level")

    def encode_segments(self, segments):
        return concat([ch(segments) for ch in self.channels], axis=-1)

    def context_features(self, samples, zero=False):
        if zero:
            return [ctx.zeros(len(samples)) for ctx in self.contexts]
        return [ctx(samples) for ctx in self.contexts]

    def head(self, seg_repr, ctx_feats, training=False, rng=None):
        parts = [seg_repr] + list(ctx_feats)
        widths = [p.shape[1] for p in parts]
        if sum(widths) != self.reduce.in_dim:
            raise ConfigError(
                f"feature width {sum(widths)} does not match reduction input {self.reduce.in_dim}")
        hidden = self.reduce(concat(parts, axis=-1), activation="relu")
        hidden = dropout(hidden, self.config.dropout, rng, training)
        return self.output(hidden)

    def forward(self, segments, samples=None, training=False, rng=None, zero_context=False):
        """Logits ``(N, C)`` for ``segments`` with context taken from ``samples``."""
        seg = self.encode_segments(segments)
        feats = []
        if self.contexts:
            if samples is None and not zero_context:
                raise ConfigError("model has context features but no context samples were given")
            feats = self.context_features(samples if samples is not None else segments, zero=zero_context)
        return self.head(seg, feats, training, rng)


def config_to_dict(config):
    return dataclasses.asdict(config)


def config_from_dict(doc):
    channels = []
    for ch in doc.get("channels", []):
        ch = dict(ch)
        enc = dict(ch.pop("encoder", {}) or {})
        if enc.get("windows") is not None:
            enc["windows"] = tuple(enc["windows"])
        channels.append(ChannelConfig(encoder=EncoderConfig(**enc), **ch))
    contexts = [ContextConfig(**c) for c in doc.get("contexts", [])]
    rest = {k: v for k, v in doc.items() if k not in ("channels", "contexts")}
    return ModelConfig(channels=channels, contexts=contexts, **rest)
