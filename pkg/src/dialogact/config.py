"""Experiment configuration files (TOML) with strict key checking.

Layout::

    name = "cnn-word+char"            # approach name used in reports

    [corpus]
    segments = "prepared/corpus.jsonl"
    partition = "prepared/partition.json"
    variant = "42"                     # 44 | 43 | 42 | 41 | mrda5 | "none"
    name = "SwDA"                      # dataset column in reports
    label_map = "my-map.tsv"           # optional, applied before the variant

    [[model.channels]]
    level = "word"                     # word | char | lemma | pos_coarse | pos_fine
    embedding = "random"               # random | pretrained | contextual
    dim = 200
    [model.channels.encoder]
    kind = "cnn"                       # maxpool | cnn | rnn | rcnn
    filters = 100

    [[model.contexts]]
    source = "labels_preceding"        # labels_preceding | labels_future | turn_taking
    scope = 3                          # positive integer or "all"
    representation = "summary"         # flat | summary

    [train]                            # TrainConfig fields
    [evaluate]
    split = "test"
    mode = "gold"                      # none | gold | auto
    [output]
    dir = "runs/cnn"

Relative paths are resolved against the config file's directory.
"""

import dataclasses
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .context import ContextConfig
from .encoders import EncoderConfig
from .errors import ConfigError
from .model import ChannelConfig, ModelConfig
from .trainer import TrainConfig, normalize_mode

VARIANTS = ("44", "43", "42", "41", "mrda5", "none")
SPLIT_NAMES = ("train", "validation", "test")


@dataclass
class CorpusConfig:
    segments: str
    partition: Optional[str] = None
    variant: str = "none"
    name: str = ""
    label_map: Optional[str] = None

    def __post_init__(self):
        self.variant = str(self.variant)
        if self.variant not in VARIANTS:
            raise ConfigError(f"corpus.variant must be one of {VARIANTS}, got {self.variant!r}")


@dataclass
class EvalConfig:
    split: str = "test"
    mode: Optional[str] = None

    def __post_init__(self):
        if self.split not in SPLIT_NAMES:
            raise ConfigError(f"evaluate.split must be one of {SPLIT_NAMES}, got {self.split!r}")
        if self.mode is not None:
            self.mode = normalize_mode(self.mode)


@dataclass
class ExperimentConfig:
    name: str
    corpus: CorpusConfig
    model: ModelConfig
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluate: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "runs"

    @property
    def mode(self):
        return self.evaluate.mode or ("gold" if self.model.contexts else "none")


def _fields(cls):
    return {f.name for f in dataclasses.fields(cls)}


def _build(cls, doc, where, **extra):
    if not isinstance(doc, dict):
        raise ConfigError(f"[{where}] must be a table")
    allowed = _fields(cls) - set(extra)
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    try:
        return cls(**doc, **extra)
    except TypeError as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def _resolve(base, path):
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base, path))


def _check_types(doc, where, types):
    for key, expected in types.items():
        if key in doc and not isinstance(doc[key], expected):
            raise ConfigError(f"[{where}] {key} has the wrong type: {doc[key]!r}")


def parse_config(doc, base_dir="."):
    allowed = {"name", "corpus", "model", "train", "evaluate", "output"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    if "corpus" not in doc:
        raise ConfigError("missing [corpus] section")

    corpus = _build(CorpusConfig, dict(doc["corpus"]), "corpus")
    corpus.segments = _resolve(base_dir, corpus.segments)
    corpus.partition = _resolve(base_dir, corpus.partition)
    corpus.label_map = _resolve(base_dir, corpus.label_map)

    model_doc = dict(doc.get("model", {}))
    channels = []
    for i, ch in enumerate(model_doc.pop("channels", [{}])):
        ch = dict(ch)
        where = f"model.channels.{i}"
        enc = _build(EncoderConfig, dict(ch.pop("encoder", {})), where + ".encoder")
        _check_types(ch, where, {"dim": int, "lowercase_on_miss": bool, "level": str})
        channel = _build(ChannelConfig, ch, where, encoder=enc)
        channel.path = _resolve(base_dir, channel.path)
        channels.append(channel)
    contexts = [_build(ContextConfig, dict(c), f"model.contexts.{i}")
                for i, c in enumerate(model_doc.pop("contexts", []))]
    model = _build(ModelConfig, model_doc, "model", channels=channels, contexts=contexts)

    train_doc = dict(doc.get("train", {}))
    _check_types(train_doc, "train", {k: int for k in
                                      ("batch_size", "patience", "max_epochs", "runs", "seed", "workers")})
    train = _build(TrainConfig, train_doc, "train")
    evaluate = _build(EvalConfig, dict(doc.get("evaluate", {})), "evaluate")
    if evaluate.mode == "auto" and model.uses_future:
        raise ConfigError("evaluate.mode = auto cannot be combined with future label contexts")

    output = dict(doc.get("output", {}))
    unknown = sorted(set(output) - {"dir"})
    if unknown:
        raise ConfigError(f"unknown key(s) in [output]: {', '.join(unknown)}")
    out_dir = _resolve(base_dir, output.get("dir", "runs"))
    name = doc.get("name") or os.path.basename(out_dir.rstrip("/")) or "model"
    return ExperimentConfig(str(name), corpus, model, train, evaluate, out_dir)


def load_config(path):
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return parse_config(doc, os.path.dirname(os.path.abspath(path)))
