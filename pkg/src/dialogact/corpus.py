"""Annotated dialog data: loading, label-set mapping, vocabularies, batching.

Segments are stored one JSON object per line::

    {"dialog_id": "sw2005", "index": 0, "speaker": "A",
     "words": ["okay", "uh"], "label": "Acknowledgement",
     "lemmas": [...], "pos_coarse": [...], "pos_fine": [...]}

The three trailing lists are optional. A partition file maps each dialog id
to ``train``, ``validation`` or ``test``, either as a JSON object or as
two whitespace-separated columns per line.
"""

import collections
import dataclasses
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, FormatError, ParameterError

SPLITS = ("train", "validation", "test")
LEVELS = ("word", "char", "lemma", "pos_coarse", "pos_fine")
OPTIONAL_LISTS = ("lemmas", "pos_coarse", "pos_fine")
_LEVEL_FIELD = {"lemma": "lemmas", "pos_coarse": "pos_coarse", "pos_fine": "pos_fine"}

PAD, UNK = "<pad>", "<unk>"

# Label distribution of the 44-tag SWBD-DAMSL set as published for the
# Switchboard Dialog Act Corpus. "Segment" (continuations) is not listed.
SWDA_DISTRIBUTION = {
    "Statement-Non-Opinion": 72824,
    "Acknowledgement": 37096,
    "Statement-Opinion": 25197,
    "Agreement": 10820,
    "Abandoned": 10569,
    "Appreciation": 4663,
    "Yes-No-Question": 4624,
    "Non-Verbal": 3548,
    "Yes Answer": 2934,
    "Conventional Closing": 2486,
    "Uninterpretable": 2158,
    "Wh-Question": 1911,
    "No Answer": 1340,
    "Response Acknowledgement": 1277,
    "Hedge": 1182,
    "Declarative Yes-No-Question": 1174,
    "Other": 1074,
    "Backchannel-Question": 1019,
    "Quotation": 934,
    "Summarization": 919,
    "Affirmative Non-Yes Answer": 836,
    "Action Directive": 719,
    "Collaborative Completion": 699,
    "Repeat-Phrase": 660,
    "Open-Question": 632,
    "Rhetorical-Question": 557,
    "Hold": 540,
    "Reject": 338,
    "Negative Non-No Answer": 292,
    "Non-understanding": 288,
    "Other Answer": 279,
    "Conventional Opening": 220,
    "Or-Clause": 207,
    "Dispreferred Answers": 205,
    "3rd-Party-Talk": 115,
    "Offers / Options": 109,
    "Self-talk": 102,
    "Downplayer": 100,
    "Maybe": 98,
    "Tag-Question": 93,
    "Declarative Wh-Question": 80,
    "Apology": 76,
    "Thanking": 67,
}
SWDA_CONTINUATION = "Segment"
SWDA_LABELS = tuple(SWDA_DISTRIBUTION) + (SWDA_CONTINUATION,)
SWDA_DISRUPTION = "Abandoned-Uninterpretable"
SWDA_STATEMENT = "Statement"
SWDA_VARIANTS = ("44", "43", "42", "41")

MRDA_DISTRIBUTION = {
    "Statement": 62608,
    "Disruption": 14978,
    "Backchannel": 14275,
    "Filler": 7701,
    "Question": 6798,
}
MRDA_LABELS = tuple(MRDA_DISTRIBUTION)
MRDA_CODES = {"S": "Statement", "D": "Disruption", "B": "Backchannel", "F": "Filler", "Q": "Question"}
MRDA_UNLABELED = frozenset({"", "Z", "z", "Unlabeled"})


@dataclass(frozen=True)
class Segment:
    dialog_id: str
    index: int
    speaker: str
    words: Tuple[str, ...]
    label: str = ""
    lemmas: Optional[Tuple[str, ...]] = None
    pos_coarse: Optional[Tuple[str, ...]] = None
    pos_fine: Optional[Tuple[str, ...]] = None

    @property
    def chars(self):
        return tuple(" ".join(self.words))

    def has_level(self, level):
        if level in ("word", "char"):
            return True
        return getattr(self, _LEVEL_FIELD[level]) is not None

    def tokens(self, level):
        if level == "word":
            return self.words
        if level == "char":
            return self.chars
        if level not in _LEVEL_FIELD:
            raise ConfigError(f"unknown token level {level!r}")
        values = getattr(self, _LEVEL_FIELD[level])
        if values is None:
            raise ConfigError(
                f"segment ({self.dialog_id}, {self.index}) has no {level!r} annotations")
        return values

    def to_record(self):
        rec = {
            "dialog_id": self.dialog_id,
            "index": self.index,
            "speaker": self.speaker,
            "words": list(self.words),
            "label": self.label,
        }
        for name in OPTIONAL_LISTS:
            value = getattr(self, name)
            if value is not None:
                rec[name] = list(value)
        return rec


@dataclass(frozen=True)
class Dialog:
    id: str
    segments: Tuple[Segment, ...]

    def __len__(self):
        return len(self.segments)

    @property
    def labels(self):
        return [s.label for s in self.segments]

    @property
    def speakers(self):
        return [s.speaker for s in self.segments]


@dataclass(frozen=True)
class Corpus:
    dialogs: Dict[str, Dialog]
    splits: Dict[str, str]
    label_variant: Optional[str] = None

    def split_dialogs(self, split):
        return [d for did, d in self.dialogs.items() if self.splits.get(did) == split]

    def segments(self, split=None):
        for did, dialog in self.dialogs.items():
            if split is None or self.splits.get(did) == split:
                yield from dialog.segments

    def available_levels(self):
        segs = list(self.segments())
        return [lvl for lvl in LEVELS if segs and all(s.has_level(lvl) for s in segs)]

    def num_segments(self, split=None):
        return sum(1 for _ in self.segments(split))


# loading ---------------------------------------------------------------------

def _string_list(value, name, path, lineno):
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise FormatError(f"field {name!r} must be a list of strings", path, lineno)
    return tuple(value)


def parse_segment(rec, path=None, lineno=None, require_label=True):
    if not isinstance(rec, dict):
        raise FormatError("record is not a JSON object", path, lineno)
    for key in ("dialog_id", "index", "speaker", "words"):
        if key not in rec:
            raise FormatError(f"missing field {key!r}", path, lineno)
    if require_label and "label" not in rec:
        raise FormatError("missing field 'label'", path, lineno)
    if not isinstance(rec["index"], int) or rec["index"] < 0:
        raise FormatError("field 'index' must be a non-negative integer", path, lineno)
    words = _string_list(rec["words"], "words", path, lineno)
    extra = {}
    for name in OPTIONAL_LISTS:
        if rec.get(name) is not None:
            values = _string_list(rec[name], name, path, lineno)
            if len(values) != len(words):
                raise FormatError(
                    f"field {name!r} has {len(values)} entries but 'words' has {len(words)}",
                    path, lineno)
            extra[name] = values
    unknown = set(rec) - {"dialog_id", "index", "speaker", "words", "label", *OPTIONAL_LISTS}
    if unknown:
        raise FormatError(f"unknown fields {sorted(unknown)}", path, lineno)
    return Segment(
        dialog_id=str(rec["dialog_id"]),
        index=rec["index"],
        speaker=str(rec["speaker"]),
        words=words,
        label=str(rec.get("label", "")),
        **extra,
    )


def read_segments(path, require_label=True):
    """Parse a segments file into dialogs ordered by first appearance."""
    grouped = collections.OrderedDict()
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", path, lineno) from exc
            seg = parse_segment(rec, path, lineno, require_label)
            key = (seg.dialog_id, seg.index)
            if key in seen:
                raise FormatError(f"duplicate segment {key}", path, lineno)
            seen.add(key)
            grouped.setdefault(seg.dialog_id, []).append(seg)
    dialogs = collections.OrderedDict()
    for did, segs in grouped.items():
        segs.sort(key=lambda s: s.index)
        if [s.index for s in segs] != list(range(len(segs))):
            raise FormatError(f"dialog {did!r}: segment indices are not consecutive from 0", path)
        dialogs[did] = Dialog(did, tuple(segs))
    return dialogs


def read_partition(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
        mapping = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise FormatError("expected 'dialog_id split'", path, lineno)
            if parts[0] in mapping:
                raise FormatError(f"dialog {parts[0]!r} assigned twice", path, lineno)
            mapping[parts[0]] = parts[1]
    else:
        if not isinstance(doc, dict):
            raise FormatError("partition JSON must be an object", path)
        mapping = {str(k): v for k, v in doc.items()}
    for did, split in mapping.items():
        if split not in SPLITS:
            raise FormatError(f"dialog {did!r}: unknown split {split!r}", path)
    return mapping


def load_corpus(segments_file, partition_file=None, require_labels=True):
    """Load a corpus; without a partition file every dialog goes to ``test``."""
    dialogs = read_segments(segments_file, require_label=require_labels)
    if partition_file is None:
        splits = {did: "test" for did in dialogs}
    else:
        splits = read_partition(partition_file)
        for did in splits:
            if did not in dialogs:
                raise FormatError(f"partition references unknown dialog {did!r}", partition_file)
        for did in dialogs:
            if did not in splits:
                raise FormatError(f"dialog {did!r} is not assigned to a split", partition_file)
    return Corpus(dialogs, splits)


def dump_segments(corpus):
    lines = []
    for dialog in corpus.dialogs.values():
        for seg in dialog.segments:
            lines.append(json.dumps(seg.to_record(), ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def save_corpus(corpus, segments_file, partition_file=None):
    with open(segments_file, "w", encoding="utf-8") as fh:
        fh.write(dump_segments(corpus))
    if partition_file is not None:
        with open(partition_file, "w", encoding="utf-8") as fh:
            json.dump({did: corpus.splits[did] for did in corpus.dialogs}, fh, indent=1)
            fh.write("\n")


# label mapping -----------------------------------------------------------------

def _normalize_variant(variant):
    v = str(variant)
    if v not in SWDA_VARIANTS:
        raise ConfigError(f"SwDA label variant must be one of {SWDA_VARIANTS}, got {variant!r}")
    return v


def swda_label_map(variant):
    """Relabeling table (label -> label) applied by ``variant``.

    Continuation merging for variants 42/41 is a structural step on top of
    this table and is done by :func:`map_swda_labels`.
    """
    v = _normalize_variant(variant)
    table = {label: label for label in SWDA_LABELS}
    table[SWDA_DISRUPTION] = SWDA_DISRUPTION
    table[SWDA_STATEMENT] = SWDA_STATEMENT
    if v in ("43", "42", "41"):
        table["Abandoned"] = SWDA_DISRUPTION
        table["Uninterpretable"] = SWDA_DISRUPTION
    if v == "41":
        table["Statement-Opinion"] = SWDA_STATEMENT
        table["Statement-Non-Opinion"] = SWDA_STATEMENT
        table[SWDA_STATEMENT] = SWDA_STATEMENT
    return table


def _merge(into, seg):
    kwargs = {"words": into.words + seg.words}
    for name in OPTIONAL_LISTS:
        a, b = getattr(into, name), getattr(seg, name)
        kwargs[name] = a + b if a is not None and b is not None else None
    return dataclasses.replace(into, **kwargs)


def _merge_continuations(dialog):
    out: List[Segment] = []
    for seg in dialog.segments:
        if seg.label != SWDA_CONTINUATION:
            out.append(seg)
            continue
        for j in range(len(out) - 1, -1, -1):
            if out[j].speaker == seg.speaker:
                out[j] = _merge(out[j], seg)
                break
        else:
            out.append(dataclasses.replace(seg, label=SWDA_DISRUPTION))
    return out


def _resequence(dialog_id, segments):
    return Dialog(dialog_id, tuple(dataclasses.replace(s, index=i) for i, s in enumerate(segments)))


def map_swda_labels(corpus, variant):
    """Reduce SWBD-DAMSL labels to the 44/43/42/41-class variants.

    Variant 42 and 41 merge each continuation ("Segment") into the nearest
    preceding segment of the same speaker; the merged segment keeps the
    earlier label and position and indices are re-sequenced afterwards. A
    continuation with no earlier same-speaker segment becomes a disruption.
    """
    v = _normalize_variant(variant)
    table = swda_label_map(v)
    dialogs = collections.OrderedDict()
    for did, dialog in corpus.dialogs.items():
        segs = []
        for seg in dialog.segments:
            if seg.label not in table:
                raise FormatError(f"segment ({did}, {seg.index}): label {seg.label!r} is not a SWBD-DAMSL tag")
            segs.append(dataclasses.replace(seg, label=table[seg.label]))
        if v in ("42", "41"):
            segs = _merge_continuations(Dialog(did, tuple(segs)))
        dialogs[did] = _resequence(did, segs)
    return Corpus(dialogs, dict(corpus.splits), label_variant=v)


def filter_mrda(corpus):
    """Keep the five general MRDA classes and drop unlabeled segments.

    Labels may be given as class names or single-letter codes. Dialogs left
    without segments are removed along with their split assignment.
    """
    dialogs = collections.OrderedDict()
    for did, dialog in corpus.dialogs.items():
        kept = []
        for seg in dialog.segments:
            label = seg.label
            if label in MRDA_UNLABELED:
                continue
            label = MRDA_CODES.get(label, label)
            if label not in MRDA_DISTRIBUTION:
                raise FormatError(f"segment ({did}, {seg.index}): unknown MRDA label {seg.label!r}")
            kept.append(dataclasses.replace(seg, label=label))
        if kept:
            dialogs[did] = _resequence(did, kept)
    splits = {did: s for did, s in corpus.splits.items() if did in dialogs}
    return Corpus(dialogs, splits, label_variant="mrda5")


def looks_like_mrda(corpus):
    labels = {s.label for s in corpus.segments()}
    allowed = set(MRDA_DISTRIBUTION) | set(MRDA_CODES) | MRDA_UNLABELED
    return bool(labels) and labels <= allowed


def read_label_map(path):
    """Two-column ``from<TAB>to`` relabeling file (tab or 2+ spaces separated)."""
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 2:
                raise FormatError("expected two columns 'from to'", path, lineno)
            src, dst = parts[0].strip(), parts[1].strip()
            if src in mapping:
                raise FormatError(f"label {src!r} mapped twice", path, lineno)
            mapping[src] = dst
    return mapping


def apply_label_map(corpus, mapping):
    """Relabel with ``mapping``; labels absent from it are kept."""
    dialogs = collections.OrderedDict(
        (did, Dialog(did, tuple(dataclasses.replace(s, label=mapping.get(s.label, s.label))
                                for s in d.segments)))
        for did, d in corpus.dialogs.items()
    )
    return Corpus(dialogs, dict(corpus.splits), corpus.label_variant)


def apply_variant(corpus, variant):
    v = str(variant)
    if v == "mrda5":
        return filter_mrda(corpus)
    return map_swda_labels(corpus, v)


def label_distribution(corpus, split=None):
    """``[(label, count, percent)]`` sorted by descending count."""
    counts = collections.Counter(s.label for s in corpus.segments(split))
    total = sum(counts.values())
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(label, n, 100.0 * n / total) for label, n in rows]


# vocabularies ------------------------------------------------------------------

class Vocabulary:
    """Token/index bijection; index 0 is padding and 1 the unknown token."""

    def __init__(self, tokens):
        self.tokens = [PAD, UNK] + [t for t in tokens if t not in (PAD, UNK)]
        self._index = {t: i for i, t in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")

    @classmethod
    def build(cls, sequences):
        counts = collections.Counter(tok for seq in sequences for tok in seq)
        return cls(sorted(counts, key=lambda t: (-counts[t], t)))

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self._index

    def index(self, token):
        return self._index.get(token, 1)

    def encode(self, tokens):
        return [self._index.get(t, 1) for t in tokens]

    def to_list(self):
        return list(self.tokens[2:])

    @classmethod
    def from_list(cls, tokens):
        return cls(tokens)


class LabelVocabulary:
    def __init__(self, labels):
        self.labels = list(labels)
        self._index = {l: i for i, l in enumerate(self.labels)}
        if len(self._index) != len(self.labels):
            raise ValueError("labels must be unique")

    def __len__(self):
        return len(self.labels)

    @property
    def size(self):
        return len(self.labels)

    def index(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"label {label!r} not in label vocabulary") from None

    def __contains__(self, label):
        return label in self._index

    def encode(self, labels):
        return [self.index(l) for l in labels]

    def decode(self, idx):
        return self.labels[idx]


def build_vocabularies(corpus):
    """Token vocabularies from the training split; labels from all splits.

    Levels not annotated on every training segment map to ``None``.
    """
    train = list(corpus.segments("train"))
    if not train:
        raise ConfigError("training split is empty")
    vocabs = {}
    for level in LEVELS:
        if all(s.has_level(level) for s in train):
            vocabs[level] = Vocabulary.build(s.tokens(level) for s in train)
        else:
            vocabs[level] = None
    vocabs["label"] = LabelVocabulary(sorted({s.label for s in corpus.segments()}))
    return vocabs


def vocabularies_to_json(vocabs):
    return {
        key: (v.labels if key == "label" else (v.to_list() if v is not None else None))
        for key, v in vocabs.items()
    }


def vocabularies_from_json(doc):
    out = {}
    for key, value in doc.items():
        if key == "label":
            out[key] = LabelVocabulary(value)
        else:
            out[key] = Vocabulary.from_list(value) if value is not None else None
    return out


# batching ---------------------------------------------------------------------

@dataclass
class LevelBatch:
    ids: np.ndarray        # (N, L) int64
    mask: np.ndarray       # (N, L) bool
    lengths: np.ndarray    # (N,) int64


@dataclass
class Batch:
    segments: List[Segment]
    levels: Dict[str, LevelBatch] = field(default_factory=dict)
    labels: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.segments)


def pad_sequences(seqs, min_length=1):
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    width = max(int(lengths.max(initial=0)), min_length)
    ids = np.zeros((len(seqs), width), dtype=np.int64)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
    mask = np.arange(width)[None, :] < lengths[:, None]
    return ids, mask, lengths


def make_batch(segments, vocabs, levels=(), label_vocab=None):
    batch = Batch(list(segments))
    for level in levels:
        vocab = vocabs.get(level)
        if vocab is None:
            raise ConfigError(f"no vocabulary for level {level!r}")
        ids, mask, lengths = pad_sequences([vocab.encode(s.tokens(level)) for s in segments])
        batch.levels[level] = LevelBatch(ids, mask, lengths)
    if label_vocab is not None:
        batch.labels = np.array([label_vocab.index(s.label) for s in segments], dtype=np.int64)
    return batch


def batches(corpus, split, batch_size, rng=None, vocabs=None, levels=(), label_vocab=None):
    """Yield padded batches of the segments in ``split``.

    With ``rng`` the segment order is shuffled by ``rng.permutation``;
    without it corpus order is kept.
    """
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size}")
    segs = list(corpus.segments(split))
    order = rng.permutation(len(segs)) if rng is not None else np.arange(len(segs))
    for start in range(0, len(segs), batch_size):
        chunk = [segs[i] for i in order[start:start + batch_size]]
        yield make_batch(chunk, vocabs or {}, levels, label_vocab)
