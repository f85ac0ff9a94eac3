"""Training for all four architectures plus frozen-model inference.

All modes share one negative-sampling update: an input vector h is scored
against the output rows of the true target and k noise-sampled words, and

    error g = sigmoid(score) - label   (label 1 for the target, 0 for noise)

drives both sides: each output row moves by -lr * g * h, and the input
gradient sum(g * v'_old) is subtracted (scaled by lr) from every row that
contributed to h.  What differs per mode is only how h is assembled:

* ``sg``    h is the center word's input vector; each context word is a target.
* ``cbow``  h is the sum of the context words' input vectors; the center word
            is the target.
* ``dbow``  h is the document's vector; every word of the (subsampled)
            document is a target, order ignored.
* ``dmpv``  h is the document vector concatenated with the 2w context slots
            in positional order, padded with a reserved trainable row; the
            center word is the target.

Multi-worker training partitions documents across threads that update the
shared matrices without locks; per-entry races are tolerated and runs are
then not bit-reproducible.  Single-worker runs with a fixed seed are.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .corpus import Corpus, NoiseTable, sample_noise
from .embedding import DOC_MODES, DocVector, EmbeddingModel, Hyperparams
from .errors import TrainingError

logger = logging.getLogger(__name__)

MAX_NEGATIVE_RETRIES = 8


@dataclass
class InferParams:
    """Learning settings for inferring a new document against a frozen model."""

    infer_alpha: float = 0.01
    infer_alpha_min: float = 0.0001
    infer_epochs: int = 1000

    def validate(self) -> None:
        if not (0 < self.infer_alpha_min <= self.infer_alpha):
            raise TrainingError("need 0 < infer_alpha_min <= infer_alpha")
        if self.infer_epochs < 1:
            raise TrainingError("infer_epochs must be >= 1")


@dataclass
class Contributor:
    """One row that contributed to an input vector h.

    ``offset`` is the row's slice start within h; 0 and full width for the
    summing modes, the slot position times the vector size when concatenated.
    """

    kind: str  # "word" or "doc"
    matrix: np.ndarray
    row: int
    offset: int


@dataclass
class TrainingContext:
    """Everything one center position contributes to training."""

    center: int
    window: int
    h: np.ndarray
    contributors: list[Contributor]
    targets: list[int]


def epoch_learning_rate(e: int, params: Hyperparams) -> float:
    """Linear per-epoch ramp from alpha down to alpha_min."""
    span = max(1, params.epochs - 1)
    return params.alpha - (params.alpha - params.alpha_min) * e / span


def _infer_learning_rate(e: int, ip: InferParams) -> float:
    span = max(1, ip.infer_epochs - 1)
    return ip.infer_alpha - (ip.infer_alpha - ip.infer_alpha_min) * e / span


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _noise_for(model: EmbeddingModel) -> NoiseTable:
    table = getattr(model, "_noise_table", None)
    if table is None or len(table) != len(model.vocabulary):
        table = NoiseTable.from_vocabulary(model.vocabulary)
        model._noise_table = table
    return table


def _draw_negatives(
    table: NoiseTable, target: int, k: int, rng: np.random.Generator
) -> list[int]:
    """Draw k noise positions, redrawing (boundedly) any that hit the target."""
    if k == 0:
        return []
    draws = table.sample_many(k, rng)
    negatives: list[int] = []
    for v in draws:
        v = int(v)
        tries = 0
        while v == target and tries < MAX_NEGATIVE_RETRIES:
            v = sample_noise(table, rng)
            tries += 1
        if v != target:
            negatives.append(v)
    return negatives


def negative_sampling_step(
    h: np.ndarray,
    target: int,
    model: EmbeddingModel,
    lr: float,
    rng: np.random.Generator,
    *,
    negatives: Sequence[int] | None = None,
    learn_hidden: bool = True,
) -> tuple[float, np.ndarray]:
    """One positive target scored against k sampled negatives.

    Updates the touched output rows in place (pre-update values feed the
    input gradient) and returns ``(loss, grad_h)``.  The caller subtracts
    ``lr * grad_h`` from each contributor slice; this function cannot see
    which rows assembled h.
    """
    if negatives is None:
        negatives = _draw_negatives(
            _noise_for(model), target, model.params.negative, rng
        )
    rows = np.empty(len(negatives) + 1, dtype=np.int64)
    rows[0] = target
    rows[1:] = negatives
    out_rows = model.w_out[rows]  # fancy index copies: grads use pre-update values
    scores = out_rows @ h
    labels = np.zeros_like(scores)
    labels[0] = 1.0
    g = _sigmoid(scores) - labels
    loss = float(np.logaddexp(0.0, -scores[0]) + np.logaddexp(0.0, scores[1:]).sum())
    if not np.isfinite(loss):
        raise TrainingError(
            f"non-finite loss at target {target} (lr={lr}); aborting epoch"
        )
    grad_h = g @ out_rows
    if learn_hidden:
        # add.at accumulates correctly if a negative row was drawn twice
        np.add.at(model.w_out, rows, np.outer(g * (-lr), h))
    return loss, grad_h


def build_input(
    mode: str,
    doc_matrix: np.ndarray | None,
    doc_row: int,
    words: np.ndarray,
    center: int,
    eff_window: int,
    model: EmbeddingModel,
) -> TrainingContext | None:
    """Assemble the input vector h for one center position.

    Returns None when there is nothing to train at this center (no context
    survived subsampling, or a lone token in skip-gram).  For the word and
    document single-row inputs, h is a live view so sequential updates flow
    through, matching per-pair SGD semantics.
    """
    d = model.params.vector_size
    lo = max(0, center - eff_window)
    hi = min(len(words), center + eff_window + 1)
    if mode == "sg":
        wi = int(words[center])
        targets = [int(words[p]) for p in range(lo, hi) if p != center]
        if not targets:
            return None
        return TrainingContext(
            center, eff_window, model.w_in[wi],
            [Contributor("word", model.w_in, wi, 0)], targets,
        )
    if mode == "cbow":
        ctx_ids = [int(words[p]) for p in range(lo, hi) if p != center]
        if not ctx_ids:
            return None
        h = model.w_in[ctx_ids].sum(axis=0)
        contributors = [Contributor("word", model.w_in, i, 0) for i in ctx_ids]
        return TrainingContext(center, eff_window, h, contributors, [int(words[center])])
    if mode == "dbow":
        return TrainingContext(
            center, eff_window, doc_matrix[doc_row],
            [Contributor("doc", doc_matrix, doc_row, 0)], [int(words[center])],
        )
    if mode == "dmpv":
        w = model.params.window
        pad = model.pad_index
        slots: list[int] = []
        for off in range(-w, w + 1):
            if off == 0:
                continue
            p = center + off
            if abs(off) <= eff_window and 0 <= p < len(words):
                slots.append(int(words[p]))
            else:
                slots.append(pad)
        h = np.concatenate([doc_matrix[doc_row]] + [model.w_in[i] for i in slots])
        contributors = [Contributor("doc", doc_matrix, doc_row, 0)] + [
            Contributor("word", model.w_in, i, (s + 1) * d) for s, i in enumerate(slots)
        ]
        return TrainingContext(center, eff_window, h, contributors, [int(words[center])])
    raise TrainingError(f"unknown mode {mode!r}")


def _apply_input_gradient(
    ctx: TrainingContext,
    grad_h: np.ndarray,
    lr: float,
    dim: int,
    learn_words: bool,
    learn_doc: bool,
) -> None:
    for c in ctx.contributors:
        if c.kind == "word" and not learn_words:
            continue
        if c.kind == "doc" and not learn_doc:
            continue
        c.matrix[c.row] -= lr * grad_h[c.offset : c.offset + dim]


def _mode_pass(
    model: EmbeddingModel,
    noise: NoiseTable,
    mode: str,
    words: np.ndarray,
    lr: float,
    rng: np.random.Generator,
    doc_matrix: np.ndarray | None,
    doc_row: int,
    learn_words: bool,
    learn_doc: bool,
    learn_hidden: bool,
) -> tuple[float, int]:
    """Run one architecture over one document's surviving tokens."""
    n = len(words)
    d = model.params.vector_size
    k = model.params.negative
    total = 0.0
    steps = 0
    if mode == "dbow":
        eff_windows = None  # order ignored, no window
    else:
        eff_windows = rng.integers(1, model.params.window + 1, size=n)
    for center in range(n):
        eff = 0 if eff_windows is None else int(eff_windows[center])
        ctx = build_input(mode, doc_matrix, doc_row, words, center, eff, model)
        if ctx is None:
            continue
        for target in ctx.targets:
            negs = _draw_negatives(noise, target, k, rng)
            loss, grad_h = negative_sampling_step(
                ctx.h, target, model, lr, rng,
                negatives=negs, learn_hidden=learn_hidden,
            )
            _apply_input_gradient(ctx, grad_h, lr, d, learn_words, learn_doc)
            total += loss
            steps += 1
    return total, steps


def _train_document(
    model: EmbeddingModel,
    noise: NoiseTable,
    token_ids: np.ndarray,
    keep: np.ndarray,
    lr: float,
    rng: np.random.Generator,
    *,
    doc_matrix: np.ndarray | None,
    doc_row: int,
    learn_words: bool = True,
    learn_doc: bool = True,
    learn_hidden: bool = True,
) -> tuple[float, int, int]:
    """One pass over one document: subsample, optional word sub-pass, main pass."""
    if len(token_ids) == 0:
        return 0.0, 0, 0
    words = token_ids[rng.random(len(token_ids)) < keep[token_ids]]
    if len(words) == 0:
        return 0.0, 0, 0
    total = 0.0
    steps = 0
    mode = model.params.mode
    if mode == "dbow" and model.params.dbow_train_words and learn_words:
        # word-learning sub-pass: skip-gram over the same survivors, shared output rows
        loss, n = _mode_pass(
            model, noise, "sg", words, lr, rng, None, 0,
            learn_words, learn_doc, learn_hidden,
        )
        total += loss
        steps += n
    loss, n = _mode_pass(
        model, noise, mode, words, lr, rng, doc_matrix, doc_row,
        learn_words, learn_doc, learn_hidden,
    )
    return total + loss, steps + n, len(words)


def _init_model(
    corpus: Corpus, params: Hyperparams, rng: np.random.Generator
) -> EmbeddingModel:
    vocab_size = len(corpus.vocabulary)
    d = params.vector_size
    in_rows = vocab_size + 1 if params.mode == "dmpv" else vocab_size
    w_in = (rng.random((in_rows, d), dtype=np.float32) - 0.5) / d
    w_out = np.zeros((vocab_size, params.output_width()), dtype=np.float32)
    if params.mode in DOC_MODES:
        dmat = (rng.random((len(corpus.documents), d), dtype=np.float32) - 0.5) / d
        doc_tags = {doc.tag: i for i, doc in enumerate(corpus.documents)}
    else:
        dmat = np.zeros((0, d), dtype=np.float32)
        doc_tags = {}
    return EmbeddingModel(
        vocabulary=corpus.vocabulary, params=params,
        w_in=w_in, w_out=w_out, d=dmat, doc_tags=doc_tags,
    )


def init_from_pretrained(
    model: EmbeddingModel, word_vectors: tuple[list[str], np.ndarray]
) -> float:
    """Overwrite input word vectors with pretrained ones where surfaces match.

    Returns the coverage ratio (matched vocabulary fraction).  Output rows
    are left alone; only the input matrix is seeded.
    """
    tokens, matrix = word_vectors
    if matrix.shape[1] != model.params.vector_size:
        raise TrainingError(
            f"pretrained dimension {matrix.shape[1]} != model dimension "
            f"{model.params.vector_size}"
        )
    by_surface = {tok: i for i, tok in enumerate(tokens)}
    covered = 0
    for pos, entry in enumerate(model.vocabulary.entries):
        row = by_surface.get(entry.surface)
        if row is not None:
            model.w_in[pos] = matrix[row].astype(np.float32)
            covered += 1
    coverage = covered / max(1, len(model.vocabulary))
    logger.info(
        "pretrained init covered %d/%d vocabulary tokens (%.1f%%)",
        covered, len(model.vocabulary), 100.0 * coverage,
    )
    return coverage


def _epoch_over(
    model: EmbeddingModel,
    noise: NoiseTable,
    docs: Sequence,
    keep: np.ndarray,
    lr: float,
    rng: np.random.Generator,
) -> tuple[float, int, int]:
    total = 0.0
    steps = 0
    tokens = 0
    doc_matrix = model.d if model.params.mode in DOC_MODES else None
    for row, doc in docs:
        loss, n, surv = _train_document(
            model, noise, doc.tokens, keep, lr, rng,
            doc_matrix=doc_matrix, doc_row=row,
        )
        total += loss
        steps += n
        tokens += surv
    return total, steps, tokens


def train(
    corpus: Corpus,
    params: Hyperparams,
    pretrained: tuple[list[str], np.ndarray] | None = None,
    *,
    epoch_callback: Callable[[EmbeddingModel, int, float], None] | None = None,
) -> EmbeddingModel:
    """Train a model over the corpus for the configured number of epochs.

    With ``workers == 1`` and a fixed seed the result is bit-reproducible.
    ``epoch_callback(model, epoch, mean_loss)`` runs after every epoch with
    the live model; callers must not mutate it.
    """
    params = replace(params)  # never mutate the caller's instance
    params.validate()
    if not any(len(doc.tokens) for doc in corpus.documents):
        raise TrainingError("corpus has no non-empty documents")
    rng = np.random.default_rng(params.seed)
    model = _init_model(corpus, params, rng)
    if pretrained is not None:
        init_from_pretrained(model, pretrained)
        if params.mode == "dbow" and not params.dbow_train_words:
            # without the word sub-pass the seeded input vectors would never
            # reach the output rows the objective actually scores against
            logger.info("pretrained vectors supplied: enabling dbow word learning")
            params.dbow_train_words = True
    noise = NoiseTable.from_vocabulary(corpus.vocabulary)
    model._noise_table = noise
    keep = corpus.vocabulary.keep_probs()
    indexed_docs = [(i, doc) for i, doc in enumerate(corpus.documents) if len(doc.tokens)]

    for e in range(params.epochs):
        lr = epoch_learning_rate(e, params)
        started = time.perf_counter()
        if params.workers == 1:
            total, steps, tokens = _epoch_over(model, noise, indexed_docs, keep, lr, rng)
        else:
            total, steps, tokens = _epoch_threaded(
                model, noise, indexed_docs, keep, lr, params, e
            )
        elapsed = max(time.perf_counter() - started, 1e-9)
        mean_loss = total / max(1, steps)
        logger.info(
            "epoch %d/%d  loss %.6f  lr %.6f  tokens/s %.0f",
            e + 1, params.epochs, mean_loss, lr, tokens / elapsed,
        )
        if epoch_callback is not None:
            epoch_callback(model, e, mean_loss)
    return model


def _epoch_threaded(
    model: EmbeddingModel,
    noise: NoiseTable,
    indexed_docs: list,
    keep: np.ndarray,
    lr: float,
    params: Hyperparams,
    epoch: int,
) -> tuple[float, int, int]:
    """Lock-free epoch: workers share the matrices and race on row updates."""
    workers = params.workers
    children = np.random.SeedSequence([params.seed, epoch]).spawn(workers)
    results: list[tuple[float, int, int]] = [(0.0, 0, 0)] * workers
    chunk = (len(indexed_docs) + workers - 1) // workers

    def run(widx: int) -> None:
        part = indexed_docs[widx * chunk : (widx + 1) * chunk]
        wrng = np.random.default_rng(children[widx])
        results[widx] = _epoch_over(model, noise, part, keep, lr, wrng)

    threads = [threading.Thread(target=run, args=(w,)) for w in range(workers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    total = sum(r[0] for r in results)
    steps = sum(r[1] for r in results)
    tokens = sum(r[2] for r in results)
    return total, steps, tokens


def infer_document(
    model: EmbeddingModel,
    tokens: Sequence[str],
    ip: InferParams,
    rng: np.random.Generator,
) -> DocVector:
    """Infer an embedding for an unseen document against a frozen model.

    A fresh vector is trained with the model's own objective; gradients are
    applied only to the new vector, never to the word or output matrices.
    """
    if model.params.mode not in DOC_MODES:
        raise TrainingError(
            f"mode {model.params.mode!r} has no document vectors; "
            "inference needs dbow or dmpv"
        )
    ip.validate()
    vocab = model.vocabulary
    ids = np.array(
        [vocab.index[t] for t in tokens if t in vocab.index], dtype=np.int32
    )
    if ids.size == 0:
        raise TrainingError("nothing to infer on: no in-vocabulary tokens")
    d = model.params.vector_size
    doc_matrix = (rng.random((1, d), dtype=np.float32) - 0.5) / d
    noise = _noise_for(model)
    keep = vocab.keep_probs()
    for e in range(ip.infer_epochs):
        lr = _infer_learning_rate(e, ip)
        _train_document(
            model, noise, ids, keep, lr, rng,
            doc_matrix=doc_matrix, doc_row=0,
            learn_words=False, learn_doc=True, learn_hidden=False,
        )
    return DocVector(values=doc_matrix[0].copy(), tag="inferred")
