"""Training loop, evaluation modes, multi-run reports and the significance rule."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .context import ContextSample
from .corpus import build_vocabularies, vocabularies_from_json, vocabularies_to_json
from .diffcore import Adam, SeededRng, Tensor, softmax_xent_batch
from .diffcore import checkpoint as ckpt
from .errors import ConfigError, NumericError, OrderingError
from .model import DialogActModel, Resources, config_from_dict, config_to_dict

MODES = ("none", "gold", "auto")
_MODE_ALIASES = {"no_context": "none", "gold_context": "gold", "auto_context": "auto"}


@dataclass
class TrainConfig:
    batch_size: int = 512
    patience: int = 10
    max_epochs: int = 500
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    runs: int = 10
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.lr < 0:
            raise ConfigError("lr must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_acc: float


def normalize_mode(mode):
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ConfigError(f"evaluation mode must be one of {MODES}, got {mode!r}")
    return mode


def default_mode(model_config):
    return "gold" if model_config.contexts else "none"


# dialog bookkeeping ----------------------------------------------------------------

class DialogView:
    """Gold label indices and speakers for every dialog of a split."""

    def __init__(self, corpus, split, labels, require_labels=True):
        self.dialogs = corpus.split_dialogs(split)
        self.segments = []
        self.samples = []
        self.targets = []
        for dialog in self.dialogs:
            speakers = dialog.speakers
            if require_labels:
                gold = np.array([labels.index(l) for l in dialog.labels], dtype=np.int64)
            else:
                gold = np.full(len(dialog), -1, dtype=np.int64)
            for t, seg in enumerate(dialog.segments):
                self.segments.append(seg)
                self.samples.append(ContextSample(gold, speakers, t))
                self.targets.append(int(gold[t]))
        self.targets = np.array(self.targets, dtype=np.int64)

    def __len__(self):
        return len(self.segments)


def _check_levels(model, segments):
    for seg in segments:
        model.check_segment(seg)


def _logits_in_batches(model, segments, samples, batch_size, zero_context):
    out = []
    for start in range(0, len(segments), batch_size):
        seg = segments[start:start + batch_size]
        smp = samples[start:start + batch_size]
        out.append(model.forward(seg, smp, training=False, zero_context=zero_context).data)
    if not out:
        return np.zeros((0, model.num_labels))
    return np.concatenate(out, axis=0)


def _auto_logits(model, view, batch_size):
    """Chronological inference: each prediction feeds the later label history."""
    if model.config.uses_future:
        raise ConfigError("automatic-context evaluation cannot use future label contexts")
    seg_repr = []
    for start in range(0, len(view), batch_size):
        seg_repr.append(model.encode_segments(view.segments[start:start + batch_size]).data)
    seg_repr = np.concatenate(seg_repr, axis=0) if seg_repr else np.zeros((0, model.segment_dim))

    offsets, pos = [], 0
    for d in view.dialogs:
        offsets.append(pos)
        pos += len(d)
    histories = [np.full(len(d), -1, dtype=np.int64) for d in view.dialogs]
    logits = np.zeros((len(view), model.num_labels))
    longest = max((len(d) for d in view.dialogs), default=0)
    for t in range(longest):
        active = [k for k, d in enumerate(view.dialogs) if len(d) > t]
        for start in range(0, len(active), batch_size):
            chunk = active[start:start + batch_size]
            rows = [offsets[k] + t for k in chunk]
            samples = [ContextSample(histories[k], view.dialogs[k].speakers, t) for k in chunk]
            feats = model.context_features(samples)
            out = model.head(Tensor(seg_repr[rows]), feats).data
            logits[rows] = out
            for k, row in zip(chunk, out):
                histories[k][t] = int(np.argmax(row))
    return logits


def predict_logits(model, corpus, split, mode, batch_size=512, require_labels=True):
    """Logits for every segment of ``split`` in corpus order."""
    mode = normalize_mode(mode)
    view = DialogView(corpus, split, model.labels, require_labels=require_labels and mode == "gold")
    _check_levels(model, view.segments)
    if mode == "auto":
        return view, _auto_logits(model, view, batch_size)
    return view, _logits_in_batches(model, view.segments, view.samples, batch_size,
                                    zero_context=(mode == "none"))


def predict(model, corpus, split, mode, batch_size=512):
    """Predicted label indices (argmax, lowest index wins ties)."""
    view, logits = predict_logits(model, corpus, split, mode, batch_size, require_labels=False)
    return view, np.argmax(logits, axis=1) if len(view) else np.zeros(0, dtype=np.int64)


def accuracy(predictions, targets):
    if len(targets) == 0:
        raise ConfigError("cannot compute accuracy on an empty split")
    return 100.0 * float(np.sum(predictions == targets)) / len(targets)


def evaluate(model, corpus, split, mode, batch_size=512):
    """Accuracy in percent on ``split`` under ``mode`` (none | gold | auto)."""
    mode = normalize_mode(mode)
    if mode == "auto" and model.config.uses_future:
        raise ConfigError("automatic-context evaluation cannot use future label contexts")
    view = DialogView(corpus, split, model.labels)
    _, logits = predict_logits(model, corpus, split, mode, batch_size)
    return accuracy(np.argmax(logits, axis=1), view.targets)


# training ----------------------------------------------------------------------

def _snapshot(model):
    return {name: p.data.copy() for name, p in model.named_parameters().items()}


def _load_snapshot(model, snap):
    for name, p in model.named_parameters().items():
        p.data[...] = snap[name]


def train_run(corpus, model_config, train_config, seed, vocabs=None, resources=None,
              log=None):
    """Train one model; returns ``(model, history)``.

    Validation accuracy (gold context when contexts are configured) drives
    early stopping. When the corpus has no validation dialogs the training
    split is monitored instead. The best epoch's parameters are restored.
    """
    rng = SeededRng(seed)
    init_rng, shuffle_rng, dropout_rng = rng.spawn(0), rng.spawn(1), rng.spawn(2)
    vocabs = vocabs or build_vocabularies(corpus)
    model = DialogActModel(model_config, vocabs, init_rng, resources)

    train = DialogView(corpus, "train", model.labels)
    _check_levels(model, train.segments)
    monitor = "validation" if corpus.split_dialogs("validation") else "train"
    val_mode = default_mode(model_config)

    params = model.parameters()
    opt = Adam(params, lr=train_config.lr, beta1=train_config.beta1,
               beta2=train_config.beta2, eps=train_config.eps)
    bs = train_config.batch_size
    history = []
    best_acc, best_state, wait = -math.inf, None, 0

    for epoch in range(1, train_config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train))
        total, count = 0.0, 0
        for b, start in enumerate(range(0, len(train), bs), 1):
            idx = order[start:start + bs]
            segs = [train.segments[i] for i in idx]
            samples = [train.samples[i] for i in idx]
            logits = model.forward(segs, samples, training=True, rng=dropout_rng)
            _, loss = softmax_xent_batch(logits, train.targets[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise NumericError(f"non-finite loss {value} at epoch {epoch}, batch {b}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += value * len(idx)
            count += len(idx)
        val_acc = evaluate(model, corpus, monitor, val_mode, bs)
        history.append(EpochRecord(epoch, total / max(count, 1), val_acc))
        if log is not None:
            log(history[-1])
        if val_acc > best_acc:
            best_acc, best_state, wait = val_acc, _snapshot(model), 0
        else:
            wait += 1
            if wait >= train_config.patience:
                break
    _load_snapshot(model, best_state)
    return model, history


def write_metrics(path, history):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch\ttrain_loss\tval_acc\n")
        for rec in history:
            fh.write(f"{rec.epoch}\t{rec.train_loss:.6f}\t{rec.val_acc:.4f}\n")


# checkpoints -------------------------------------------------------------------

def save_model(path, model, vocabs, extra=None):
    meta = {
        "model": config_to_dict(model.config),
        "vocabularies": vocabularies_to_json(vocabs),
    }
    meta.update(extra or {})
    ckpt.save(path, model.named_parameters(), meta)


def load_model(path, resources=None):
    """Rebuild a model from a checkpoint; returns ``(model, vocabs, meta)``."""
    doc = ckpt.read(path)
    meta = doc.get("meta", {})
    try:
        config = config_from_dict(meta["model"])
        vocabs = vocabularies_from_json(meta["vocabularies"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"checkpoint {path} lacks model metadata: {exc}") from exc
    model = DialogActModel(config, vocabs, SeededRng(0), resources)
    ckpt.restore(model.named_parameters(), doc["parameters"], path)
    return model, vocabs, meta


# multiple runs -----------------------------------------------------------------

@dataclass
class RunReport:
    approach: str
    accuracies: List[float] = field(default_factory=list)
    corpus: str = ""
    split: str = "test"
    mode: str = "none"

    def __post_init__(self):
        for a in self.accuracies:
            if not 0.0 <= a <= 100.0:
                raise ValueError(f"accuracy {a} outside [0, 100]")

    @property
    def mu(self):
        return float(np.mean(self.accuracies))

    @property
    def sigma(self):
        return float(np.std(self.accuracies))

    def to_dict(self):
        return {"approach": self.approach, "corpus": self.corpus, "split": self.split,
                "mode": self.mode, "mu": self.mu, "sigma": self.sigma,
                "accuracies": list(self.accuracies)}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["approach"], [float(a) for a in doc["accuracies"]],
                   doc.get("corpus", ""), doc.get("split", "test"), doc.get("mode", "none"))


@dataclass
class RunSpec:
    """Everything one run needs; picklable so runs can go to worker processes."""

    corpus: object
    model_config: object
    train_config: TrainConfig
    seed: int
    split: str
    mode: str
    checkpoint: Optional[str] = None
    metrics: Optional[str] = None


def _execute(spec):
    vocabs = build_vocabularies(spec.corpus)
    model, history = train_run(spec.corpus, spec.model_config, spec.train_config, spec.seed,
                               vocabs=vocabs, resources=Resources())
    acc = evaluate(model, spec.corpus, spec.split, spec.mode, spec.train_config.batch_size)
    if spec.metrics:
        write_metrics(spec.metrics, history)
    if spec.checkpoint:
        save_model(spec.checkpoint, model, vocabs, {"seed": spec.seed})
    return acc


def multi_run(corpus, model_config, train_config, n=None, approach="model", split="test",
              mode=None, corpus_name="", checkpoint_paths=None, metrics_paths=None):
    """``n`` independent train+evaluate runs with seeds ``seed .. seed+n-1``."""
    n = train_config.runs if n is None else n
    if n < 1:
        raise ConfigError("number of runs must be >= 1")
    mode = normalize_mode(mode or default_mode(model_config))
    if mode == "auto" and model_config.uses_future:
        raise ConfigError("automatic-context evaluation cannot use future label contexts")
    specs = [
        RunSpec(corpus, model_config, train_config, train_config.seed + i, split, mode,
                checkpoint_paths[i] if checkpoint_paths else None,
                metrics_paths[i] if metrics_paths else None)
        for i in range(n)
    ]
    if train_config.workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=min(train_config.workers, n)) as pool:
            accs = list(pool.map(_execute, specs))
    else:
        accs = [_execute(s) for s in specs]
    return RunReport(approach, accs, corpus_name, split, mode)


def significant(worse, better):
    """True iff ``mu_w + sigma_w < mu_b - sigma_b`` (strict)."""
    mu_w, sd_w = worse
    mu_b, sd_b = better
    if mu_w > mu_b:
        raise OrderingError(f"worse mean {mu_w} exceeds better mean {mu_b}; swap the operands")
    return mu_w + sd_w < mu_b - sd_b
