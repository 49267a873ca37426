"""Synthetic corpora and small utilities shared by the test modules."""

import collections
import string

import numpy as np

from dialogact.corpus import Corpus, Dialog, Segment


def make_corpus(dialogs, splits=None):
    """``dialogs``: {dialog_id: [(speaker, words, label), ...]}."""
    out = collections.OrderedDict()
    for did, rows in dialogs.items():
        segs = []
        for i, row in enumerate(rows):
            speaker, words, label = row[:3]
            extra = row[3] if len(row) > 3 else {}
            segs.append(Segment(did, i, speaker, tuple(words), label, **extra))
        out[did] = Dialog(did, tuple(segs))
    splits = splits or {did: "train" for did in out}
    return Corpus(out, dict(splits))


def overfit_corpus(seed=0, n_dialogs=8, per_dialog=4):
    """32 segments over 4 classes; each segment contains its class keyword."""
    rng = np.random.default_rng(seed)
    keywords = ["alpha", "bravo", "charlie", "delta"]
    filler = ["the", "a", "it", "so", "and", "we", "you", "okay"]
    dialogs = {}
    for d in range(n_dialogs):
        rows = []
        for i in range(per_dialog):
            c = (d * per_dialog + i) % 4
            words = list(rng.choice(filler, 3))
            words.insert(int(rng.integers(0, 4)), keywords[c])
            rows.append(("AB"[i % 2], words, f"class{c}"))
        dialogs[f"d{d}"] = rows
    return make_corpus(dialogs)


def alternation_corpus(n_train=12, n_val=4, n_test=4, length=20, seed=0):
    """Identical words everywhere; labels alternate A, B, A, ... in every dialog."""
    rng = np.random.default_rng(seed)
    dialogs, splits = {}, {}
    for k, (split, count) in enumerate((("train", n_train), ("validation", n_val), ("test", n_test))):
        for j in range(count):
            did = f"{split}{j}"
            rows = [(str(rng.choice(["A", "B"])), ["okay", "right"], "AB"[t % 2]) for t in range(length)]
            dialogs[did] = rows
            splits[did] = split
    return make_corpus(dialogs, splits)


_STEM_LETTERS = [c for c in string.ascii_lowercase if c not in "edingaou"]


def _stems(rng, n, taken):
    out = []
    while len(out) < n:
        length = int(rng.integers(3, 6))
        stem = "".join(rng.choice(_STEM_LETTERS, length))
        if stem not in taken:
            taken.add(stem)
            out.append(stem)
    return out


def suffix_corpus(seed=0, n_train=240, n_val=60, n_test=80, per_dialog=10):
    """Label is decided by the suffix (-ing / -ed); stems are disjoint across splits."""
    rng = np.random.default_rng(seed)
    taken = set()
    dialogs, splits = {}, {}
    for split, n in (("train", n_train), ("validation", n_val), ("test", n_test)):
        stems = _stems(rng, n, taken)
        for start in range(0, n, per_dialog):
            did = f"{split}{start // per_dialog}"
            rows = []
            for k, stem in enumerate(stems[start:start + per_dialog]):
                progressive = bool(rng.integers(0, 2))
                word = stem + ("ing" if progressive else "ed")
                rows.append(("AB"[k % 2], ["we", word], "progressive" if progressive else "past"))
            dialogs[did] = rows
            splits[did] = split
    return make_corpus(dialogs, splits)


def write_jsonl(path, corpus):
    from dialogact.corpus import dump_segments

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_segments(corpus))
