"""Command-line front end: ``dialogact {prepare,train,evaluate,predict,report}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import dataclasses
import json
import os
import sys

from . import corpus as corpus_mod
from .config import VARIANTS, load_config
from .errors import ConfigError, DialogActError, FormatError, MissingVectorsError
from .trainer import (
    MODES,
    RunReport,
    default_mode,
    evaluate,
    multi_run,
    load_model,
    predict,
    significant,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _err(msg):
    print(f"dialogact: error: {msg}", file=sys.stderr)


def _require_file(path, what):
    if path is None or not os.path.isfile(path):
        raise UsageError(f"{what} not found: {path}")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# corpus helpers ------------------------------------------------------------------

def prepare_corpus(segments, partition, variant, label_map=None, require_labels=True):
    """Load, relabel and variant-map a corpus. ``variant='none'`` keeps labels."""
    corpus = corpus_mod.load_corpus(segments, partition, require_labels=require_labels)
    if label_map:
        corpus = corpus_mod.apply_label_map(corpus, corpus_mod.read_label_map(label_map))
    variant = str(variant)
    if variant == "none":
        return corpus
    if variant == "mrda5" or corpus_mod.looks_like_mrda(corpus):
        return corpus_mod.filter_mrda(corpus)
    return corpus_mod.map_swda_labels(corpus, variant)


def summary_tsv(corpus):
    rows = ["label\tcount\tpercent"]
    total = 0
    for label, count, pct in corpus_mod.label_distribution(corpus):
        rows.append(f"{label}\t{count}\t{pct:.2f}")
        total += count
    rows.append(f"Total\t{total}\t100.00" if total else "Total\t0\t0.00")
    for split in corpus_mod.SPLITS:
        rows.append(f"#{split}\t{corpus.num_segments(split)}\t"
                    f"{len(corpus.split_dialogs(split))} dialogs")
    return "\n".join(rows) + "\n"


# commands ------------------------------------------------------------------------

def cmd_prepare(args):
    _require_file(args.segments, "segments file")
    if args.partition is not None:
        _require_file(args.partition, "partition file")
    if args.label_map is not None:
        _require_file(args.label_map, "label map file")
    corpus = prepare_corpus(args.segments, args.partition, args.variant, args.label_map)
    os.makedirs(args.out, exist_ok=True)
    _write_text(os.path.join(args.out, "corpus.jsonl"), corpus_mod.dump_segments(corpus))
    partition = {did: corpus.splits[did] for did in corpus.dialogs}
    _write_text(os.path.join(args.out, "partition.json"), json.dumps(partition, indent=1) + "\n")
    if corpus.split_dialogs("train"):
        vocabs = corpus_mod.vocabularies_to_json(corpus_mod.build_vocabularies(corpus))
        _write_text(os.path.join(args.out, "vocab.json"), json.dumps(vocabs, ensure_ascii=False) + "\n")
    summary = summary_tsv(corpus)
    _write_text(os.path.join(args.out, "summary.tsv"), summary)
    sys.stdout.write(summary)
    return EXIT_OK


def _experiment(args):
    _require_file(args.config, "config file")
    exp = load_config(args.config)
    if args.runs is not None:
        if args.runs < 1:
            raise UsageError("--runs must be >= 1")
        exp.train = dataclasses.replace(exp.train, runs=args.runs)
    if args.seed is not None:
        exp.train = dataclasses.replace(exp.train, seed=args.seed)
    if args.out is not None:
        exp.output_dir = args.out
    if args.split is not None:
        exp.evaluate.split = args.split
    if args.mode is not None:
        exp.evaluate.mode = args.mode
        if args.mode == "auto" and exp.model.uses_future:
            raise ConfigError("--mode auto cannot be used with future label contexts")
    _require_file(exp.corpus.segments, "segments file")
    if exp.corpus.partition is not None:
        _require_file(exp.corpus.partition, "partition file")
    for ch in exp.model.channels:
        if ch.path is not None:
            _require_file(ch.path, f"{ch.embedding} embedding file")
    return exp


def cmd_train(args):
    exp = _experiment(args)
    corpus = prepare_corpus(exp.corpus.segments, exp.corpus.partition, exp.corpus.variant,
                            exp.corpus.label_map)
    n = exp.train.runs
    os.makedirs(exp.output_dir, exist_ok=True)
    ckpts = [os.path.join(exp.output_dir, f"run-{i:02d}.ckpt.json") for i in range(n)]
    metrics = [os.path.join(exp.output_dir, f"run-{i:02d}.metrics.tsv") for i in range(n)]
    report = multi_run(corpus, exp.model, exp.train, n, approach=exp.name,
                       split=exp.evaluate.split, mode=exp.mode,
                       corpus_name=exp.corpus.name or exp.corpus.variant,
                       checkpoint_paths=ckpts, metrics_paths=metrics)
    corpus_meta = {"segments": exp.corpus.segments, "partition": exp.corpus.partition,
                   "variant": exp.corpus.variant, "label_map": exp.corpus.label_map}
    for path in ckpts:
        _annotate_checkpoint(path, corpus_meta)
    doc = report.to_dict()
    doc["seeds"] = [exp.train.seed + i for i in range(n)]
    _write_text(os.path.join(exp.output_dir, "report.json"), json.dumps(doc, indent=1) + "\n")
    _write_text(os.path.join(exp.output_dir, "report.tsv"), run_report_tsv(report))
    print(f"{report.approach}\tmu={report.mu:.2f}\tsigma={report.sigma:.2f}\truns={n}")
    return EXIT_OK


def _annotate_checkpoint(path, corpus_meta):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    doc.setdefault("meta", {})["corpus"] = corpus_meta
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def run_report_tsv(report):
    rows = ["approach\tmu\tsigma\taccuracies",
            f"{report.approach}\t{report.mu:.4f}\t{report.sigma:.4f}\t"
            + ",".join(f"{a:.4f}" for a in report.accuracies)]
    return "\n".join(rows) + "\n"


def _load_checkpoint(args):
    _require_file(args.checkpoint, "checkpoint")
    return load_model(args.checkpoint)


def cmd_evaluate(args):
    model, _, meta = _load_checkpoint(args)
    mode = args.mode or default_mode(model.config)
    if mode == "auto" and model.config.uses_future:
        raise ConfigError("--mode auto cannot be used with future label contexts")
    cmeta = meta.get("corpus", {})
    segments = args.segments or cmeta.get("segments")
    partition = args.partition or cmeta.get("partition")
    variant = args.variant or cmeta.get("variant", "none")
    _require_file(segments, "segments file")
    if partition is not None:
        _require_file(partition, "partition file")
    corpus = prepare_corpus(segments, partition, variant, cmeta.get("label_map") if not args.segments else None)
    acc = evaluate(model, corpus, args.split, mode)
    line = f"accuracy\t{args.split}\t{mode}\t{acc:.4f}"
    print(line)
    if args.out:
        _write_text(args.out, "split\tmode\taccuracy\n" + f"{args.split}\t{mode}\t{acc:.4f}\n")
    return EXIT_OK


def cmd_predict(args):
    model, vocabs, _ = _load_checkpoint(args)
    mode = args.mode or "auto"
    _require_file(args.dialogs, "dialog file")
    corpus = corpus_mod.load_corpus(args.dialogs, None, require_labels=False)
    lines = []
    if corpus.dialogs:
        view, preds = predict(model, corpus, "test", mode)
        for seg, p in zip(view.segments, preds):
            lines.append(f"{seg.dialog_id}\t{seg.index}\t{model.labels.decode(int(p))}")
    text = "".join(line + "\n" for line in lines)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# report --------------------------------------------------------------------------

def collect_reports(paths):
    reports = []
    for root in paths:
        if os.path.isfile(root):
            files = [root]
        elif os.path.isdir(root):
            files = []
            for dirpath, dirnames, filenames in os.walk(root):
                dirnames.sort()
                if "report.json" in filenames:
                    files.append(os.path.join(dirpath, "report.json"))
        else:
            raise UsageError(f"runs path not found: {root}")
        for f in files:
            with open(f, encoding="utf-8") as fh:
                try:
                    reports.append(RunReport.from_dict(json.load(fh)))
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise FormatError(f"bad report: {exc}", f) from exc
    if not reports:
        raise UsageError("no report.json files found")
    return reports


def _table(reports):
    corpora = []
    approaches = []
    cells = {}
    for r in reports:
        if r.corpus not in corpora:
            corpora.append(r.corpus)
        if r.approach not in approaches:
            approaches.append(r.approach)
        key = (r.approach, r.corpus)
        if key in cells:
            raise ConfigError(f"two reports for approach {r.approach!r} on corpus {r.corpus!r}")
        cells[key] = (r.mu, r.sigma)
    return corpora, approaches, cells


def accuracy_rows(reports):
    corpora, approaches, cells = _table(reports)
    header = ["Approach"]
    for c in corpora:
        header += [f"{c} μ", f"{c} σ"]
    rows = [header]
    for a in approaches:
        row = [a]
        for c in corpora:
            if (a, c) in cells:
                mu, sd = cells[(a, c)]
                row += [f"{mu:.2f}", f"{sd:.2f}"]
            else:
                row += ["", ""]
        rows.append(row)
    return rows


def significance_rows(reports, corpus):
    """Pairwise matrix: cell (row, col) says whether the two approaches differ significantly."""
    _, approaches, cells = _table(reports)
    names = [a for a in approaches if (a, corpus) in cells]
    if len(names) < 2:
        return None
    rows = [[corpus] + names]
    for a in names:
        row = [a]
        for b in names:
            if a == b:
                row.append("-")
                continue
            x, y = cells[(a, corpus)], cells[(b, corpus)]
            worse, better = (x, y) if x[0] <= y[0] else (y, x)
            row.append("yes" if significant(worse, better) else "no")
        rows.append(row)
    return rows


def tsv(rows):
    return "".join("\t".join(r) + "\n" for r in rows)


def pretty(rows):
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]

    def fmt(r):
        return "| " + " | ".join(v.ljust(w) for v, w in zip(r, widths)) + " |"

    rule = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([fmt(rows[0]), rule] + [fmt(r) for r in rows[1:]]) + "\n"


def cmd_report(args):
    reports = collect_reports(args.runs_dirs)
    rows = accuracy_rows(reports)
    corpora = _table(reports)[0]
    matrices = [m for m in (significance_rows(reports, c) for c in corpora) if m]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_text(os.path.join(args.out, "table.tsv"), tsv(rows))
        _write_text(os.path.join(args.out, "table.txt"), pretty(rows))
        if matrices:
            _write_text(os.path.join(args.out, "significance.tsv"),
                        "\n".join(tsv(m) for m in matrices))
            _write_text(os.path.join(args.out, "significance.txt"),
                        "\n".join(pretty(m) for m in matrices))
    render = tsv if args.format == "tsv" else pretty
    out = [render(rows)]
    for m in matrices:
        out.append("\n" if args.format == "tsv" else "\nsignificant (μ_w + σ_w < μ_b − σ_b):\n")
        out.append(render(m))
    sys.stdout.write("".join(out))
    return EXIT_OK


# parser --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="dialogact", description="Dialog act recognition experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("prepare", help="map labels and write a canonical corpus + vocabularies")
    sp.add_argument("--segments", required=True, help="raw segments JSONL")
    sp.add_argument("--partition", help="dialog -> split assignment (JSON or two columns)")
    sp.add_argument("--variant", required=True, choices=VARIANTS[:-1])
    sp.add_argument("--label-map", help="optional from/to relabeling file")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("train", help="train N runs from a config file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--runs", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--split", choices=corpus_mod.SPLITS, help="split scored after training")
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--out", help="output directory (overrides the config)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="score a checkpoint on a split")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--split", choices=corpus_mod.SPLITS, default="test")
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--segments", help="corpus file (defaults to the one used in training)")
    sp.add_argument("--partition")
    sp.add_argument("--variant", choices=VARIANTS)
    sp.add_argument("--out", help="metrics file")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("predict", help="label unseen dialogs chronologically")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--dialogs", required=True, help="segments JSONL (labels optional)")
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--out", help="output file (default stdout)")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("report", help="accuracy table and significance matrix")
    sp.add_argument("runs_dirs", nargs="+", metavar="RUNS", help="run directories or report.json files")
    sp.add_argument("--format", choices=("table", "tsv"), default="table")
    sp.add_argument("--out", help="directory for table/significance files")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        _err(exc)
        return EXIT_USAGE
    except (FormatError, MissingVectorsError) as exc:
        _err(exc)
        return EXIT_RUNTIME
    except (DialogActError, OSError, ValueError, ArithmeticError) as exc:
        _err(exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
