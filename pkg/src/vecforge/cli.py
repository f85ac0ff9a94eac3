"""Command-line surface binding ingestion, training, inference, and evaluation.

Every command is a batch run: flags in, files out, nothing interactive.
All randomized behavior is controlled by --seed, and any command run with
--workers 1 and a fixed seed writes byte-identical outputs across runs.

Exit codes: 0 success, 1 usage error, 2 data or model error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

import numpy as np

from . import evaluation
from .corpus import CORPUS_FORMATS, export_vocabulary, load_corpus, parse_corpus_lines, read_tagged_tokens
from .embedding import (
    MODES,
    Hyperparams,
    cosine,
    export_text,
    load_model,
    load_word_vectors,
    save_model,
)
from .errors import VecforgeError
from .evaluation import EvalReport, make_synthetic, write_synthetic
from .training import InferParams, infer_document, train

logger = logging.getLogger(__name__)

# paper-tuned window / subsampling defaults per mode
MODE_DEFAULTS = {
    "dbow": (15, 1e-5),
    "dmpv": (5, 1e-6),
    "sg": (5, 1e-5),
    "cbow": (5, 1e-5),
}


class UsageError(Exception):
    """Bad flag combination detected before any work starts."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="corpus file")
    p.add_argument("--format", default="tagged-lines", choices=CORPUS_FORMATS)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--sample", type=float, default=None,
                   help="subsampling threshold (default depends on --mode)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vecforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", help="build and export a vocabulary")
    _add_corpus_flags(p)
    p.add_argument("--output", required=True, help="vocabulary file (surface<TAB>count)")

    p = sub.add_parser("train", help="train an embedding model")
    _add_corpus_flags(p)
    p.add_argument("--mode", default="dbow", choices=MODES)
    p.add_argument("--size", type=int, default=300, help="vector dimension")
    p.add_argument("--window", type=int, default=None,
                   help="context radius (default depends on --mode)")
    p.add_argument("--negative", type=int, default=5)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--alpha", type=float, default=0.025)
    p.add_argument("--min-alpha", type=float, default=0.0001)
    p.add_argument("--dbow-words", action="store_true",
                   help="run a word-learning sub-pass before each dbow pass")
    p.add_argument("--pretrained", default=None, help="word-vector file to seed from")
    p.add_argument("--pretrained-format", default="text", choices=("text", "binary"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", required=True, help="model file to write")

    p = sub.add_parser("infer", help="infer vectors for new documents from a frozen model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="documents, one per line")
    p.add_argument("--format", default="plain-lines", choices=CORPUS_FORMATS)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--min-alpha", type=float, default=0.0001)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", required=True, help="one 'tag v1 ... vd' line per document")

    p = sub.add_parser("eval", help="run an evaluation protocol")
    task = p.add_subparsers(dest="task", required=True)

    q = task.add_parser("qdup", help="duplicate-pair ranking, ROC AUC")
    q.add_argument("--scorer", required=True, choices=("doc2vec", "average", "ngram"))
    q.add_argument("--pairs", required=True, help="tag_a<TAB>tag_b<TAB>label file")
    q.add_argument("--model", default=None)
    q.add_argument("--corpus", default=None, help="corpus file (average/ngram scorers)")
    q.add_argument("--corpus-format", default="tagged-lines", choices=CORPUS_FORMATS)
    q.add_argument("--ngram-order", type=int, default=3)
    q.add_argument("--output", default=None, help="report file (default: stdout)")
    q.add_argument("--dump", default=None, help="per-pair score file")

    s = task.add_parser("sts", help="sentence-pair similarity, Pearson's r")
    s.add_argument("--scorer", required=True, choices=("doc2vec", "average", "ngram"))
    s.add_argument("--sts", required=True, help="sentence_a<TAB>sentence_b<TAB>gold file")
    s.add_argument("--model", default=None)
    s.add_argument("--ngram-order", type=int, default=3)
    s.add_argument("--infer-alpha", type=float, default=0.01)
    s.add_argument("--infer-min-alpha", type=float, default=0.0001)
    s.add_argument("--infer-epochs", type=int, default=1000)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--output", default=None, help="report file (default: stdout)")
    s.add_argument("--dump", default=None, help="per-pair score file")

    p = sub.add_parser("nn", help="nearest neighbors by cosine (diagnostic)")
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True, help="word surface or document tag")
    p.add_argument("--space", default="words", choices=("words", "docs"))
    p.add_argument("--topn", type=int, default=10)

    p = sub.add_parser("export", help="export vectors in the text interchange layout")
    p.add_argument("--model", required=True)
    p.add_argument("--which", required=True, choices=("words", "docs"))
    p.add_argument("--output", required=True)

    p = sub.add_parser("synth", help="generate a synthetic evaluation fixture")
    p.add_argument("--topics", type=int, default=4)
    p.add_argument("--docs-per-topic", type=int, default=200)
    p.add_argument("--doc-len", type=int, default=40)
    p.add_argument("--vocab-per-topic", type=int, default=60)
    p.add_argument("--function-words", type=int, default=12)
    p.add_argument("--dup-fraction", type=float, default=0.3)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-corpus", required=True)
    p.add_argument("--out-pairs", required=True)
    p.add_argument("--out-sts", required=True)

    return parser


def _resolved_mode_defaults(args) -> tuple[int, float]:
    window, sample = MODE_DEFAULTS[getattr(args, "mode", "dbow")]
    if getattr(args, "window", None) is not None:
        window = args.window
    if args.sample is not None:
        sample = args.sample
    return window, sample


def _write_report(report: EvalReport, output: str | None, dump: str | None) -> None:
    line = report.to_tsv_line()
    if output is None:
        print(line)
    else:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(line + "\n")
    if dump is not None:
        with open(dump, "w", encoding="utf-8") as fh:
            for p in report.pair_scores:
                label = "" if p.label is None else f"\t{p.label:g}"
                fh.write(f"{p.tag_a}\t{p.tag_b}\t{p.score!r}{label}\n")


def cmd_vocab(args) -> int:
    _, sample = _resolved_mode_defaults(args)
    corpus = load_corpus(args.input, args.format, min_count=args.min_count, subsample_t=sample)
    export_vocabulary(corpus.vocabulary, args.output)
    return 0


def cmd_train(args) -> int:
    window, sample = _resolved_mode_defaults(args)
    params = Hyperparams(
        mode=args.mode, vector_size=args.size, window=window,
        min_count=args.min_count, subsample_t=sample, negative=args.negative,
        epochs=args.epochs, alpha=args.alpha, alpha_min=args.min_alpha,
        dbow_train_words=args.dbow_words, seed=args.seed, workers=args.workers,
    )
    params.validate()  # fail fast, before corpus loading
    corpus = load_corpus(args.input, args.format, min_count=args.min_count, subsample_t=sample)
    pretrained = None
    if args.pretrained is not None:
        pretrained = load_word_vectors(args.pretrained, args.pretrained_format)
    model = train(corpus, params, pretrained)
    save_model(model, args.output)
    return 0


def cmd_infer(args) -> int:
    model = load_model(args.model)
    with open(args.input, encoding="utf-8") as fh:
        docs = parse_corpus_lines(fh.read().splitlines(), args.format)
    ip = InferParams(
        infer_alpha=args.alpha, infer_alpha_min=args.min_alpha, infer_epochs=args.epochs
    )
    ip.validate()
    rng = np.random.default_rng(args.seed)
    lines = []
    for tag, tokens in docs:
        vec = infer_document(model, tokens, ip, rng)  # empty/all-OOV lines are fatal
        lines.append(tag + " " + " ".join(repr(float(v)) for v in vec.values))
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0


def _qdup_scorer(args):
    if args.scorer == "doc2vec":
        if args.model is None:
            raise UsageError("--scorer doc2vec requires --model")
        return evaluation.doc_vector_scorer(load_model(args.model))
    if args.corpus is None:
        raise UsageError(f"--scorer {args.scorer} requires --corpus")
    docs = read_tagged_tokens(args.corpus, args.corpus_format)
    if args.scorer == "average":
        if args.model is None:
            raise UsageError("--scorer average requires --model")
        return evaluation.averaging_scorer(load_model(args.model), docs)
    return evaluation.ngram_scorer(docs, args.ngram_order)


def cmd_eval_qdup(args) -> int:
    scorer = _qdup_scorer(args)
    report = evaluation.run_qdup(scorer, args.pairs)
    _write_report(report, args.output, args.dump)
    return 0


def cmd_eval_sts(args) -> int:
    if args.scorer == "ngram":
        scorer = evaluation.sentence_ngram_scorer(args.ngram_order)
    else:
        if args.model is None:
            raise UsageError(f"--scorer {args.scorer} requires --model")
        model = load_model(args.model)
        if args.scorer == "average":
            scorer = evaluation.sentence_averaging_scorer(model)
        else:
            ip = InferParams(
                infer_alpha=args.infer_alpha,
                infer_alpha_min=args.infer_min_alpha,
                infer_epochs=args.infer_epochs,
            )
            ip.validate()
            scorer = evaluation.sentence_infer_scorer(
                model, ip, np.random.default_rng(args.seed)
            )
    report = evaluation.run_sts(scorer, args.sts)
    _write_report(report, args.output, args.dump)
    return 0


def cmd_nn(args) -> int:
    model = load_model(args.model)
    if args.space == "words":
        names = [e.surface for e in model.vocabulary.entries]
        matrix = model.w_in[: len(names)]
        if args.query not in model.vocabulary.index:
            raise VecforgeError(f"unknown token {args.query!r}")
        qrow = model.vocabulary.position(args.query)
    else:
        if model.d.shape[0] == 0:
            raise VecforgeError("model has no document vectors")
        names = [""] * len(model.doc_tags)
        for tag, row in model.doc_tags.items():
            names[row] = tag
        matrix = model.d
        if args.query not in model.doc_tags:
            raise VecforgeError(f"unknown document tag {args.query!r}")
        qrow = model.doc_tags[args.query]
    ranked = sorted(
        (
            (cosine(matrix[qrow], matrix[i]), i)
            for i in range(matrix.shape[0])
            if i != qrow and np.any(matrix[i])
        ),
        key=lambda si: (-si[0], si[1]),
    )
    for sim, i in ranked[: args.topn]:
        print(f"{names[i]}\t{sim:.6f}")
    return 0


def cmd_export(args) -> int:
    export_text(load_model(args.model), args.which, args.output)
    return 0


def cmd_synth(args) -> int:
    data = make_synthetic(
        n_topics=args.topics,
        docs_per_topic=args.docs_per_topic,
        doc_len=args.doc_len,
        vocab_per_topic=args.vocab_per_topic,
        n_function_words=args.function_words,
        dup_fraction=args.dup_fraction,
        seed=args.seed,
        dropout=args.dropout,
    )
    write_synthetic(data, args.out_corpus, args.out_pairs, args.out_sts)
    return 0


_COMMANDS = {
    "vocab": cmd_vocab,
    "train": cmd_train,
    "infer": cmd_infer,
    "nn": cmd_nn,
    "export": cmd_export,
    "synth": cmd_synth,
}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "eval":
            handler = cmd_eval_qdup if args.task == "qdup" else cmd_eval_sts
            return handler(args)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"vecforge: error: {exc}", file=sys.stderr)
        return 1
    except VecforgeError as exc:
        print(f"vecforge: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"vecforge: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
