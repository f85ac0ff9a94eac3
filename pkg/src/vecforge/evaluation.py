"""Metrics, task protocols, and the synthetic fixture generator.

Two protocols are supported: ranking document pairs by similarity and
scoring the ranking with ROC AUC (duplicate detection), and correlating
predicted sentence-pair similarities with gold scores via Pearson's r
(semantic textual similarity).  A deterministic synthetic corpus generator
provides desk-scale fixtures for both.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .baselines import DEFAULT_MAX_ORDER, average_embedding, ngram_similarity
from .embedding import EmbeddingModel, cosine
from .errors import EvaluationError
from .training import InferParams, infer_document

logger = logging.getLogger(__name__)

# A pair scorer returns the similarity score, or None when the pair cannot
# be scored (it is then skipped and counted); unknown tags raise KeyError.
PairScorer = Callable[[str, str], "float | None"]
SentenceScorer = Callable[[Sequence[str], Sequence[str]], "float | None"]


@dataclass
class ScoredPair:
    tag_a: str
    tag_b: str
    score: float
    label: float | None = None


@dataclass
class EvalReport:
    task: str  # "qdup" or "sts"
    metric: str  # "auc" or "pearson"
    value: float
    pairs: int
    skipped: int
    positives: int | None = None
    pair_scores: list[ScoredPair] = field(default_factory=list)

    def to_tsv_line(self) -> str:
        return f"{self.task}\t{self.metric}\t{self.value:.6f}\t{self.pairs}\t{self.skipped}"


def roc_auc(pairs: Sequence[ScoredPair]) -> float:
    """Probability a random positive outscores a random negative, ties at 0.5.

    Midrank formulation of the Mann-Whitney statistic; agrees exactly with
    exhaustive positive-negative pair counting.
    """
    scores = np.array([p.score for p in pairs], dtype=np.float64)
    labels = np.array([p.label for p in pairs])
    if not np.all(np.isfinite(scores)):
        raise EvaluationError("non-finite pair score")
    if not set(np.unique(labels)) <= {0, 1}:
        raise EvaluationError("duplicate labels must be 0 or 1")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("AUC needs at least one positive and one negative pair")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Standard sample correlation coefficient."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise EvaluationError("pearson needs two equal-length sequences")
    if xa.size < 2:
        raise EvaluationError("pearson needs at least 2 observations")
    xm = xa - xa.mean()
    ym = ya - ya.mean()
    sx = math.sqrt(float(xm @ xm))
    sy = math.sqrt(float(ym @ ym))
    if sx == 0.0 or sy == 0.0:
        raise EvaluationError("pearson undefined for zero-variance input")
    return float(np.clip((xm @ ym) / (sx * sy), -1.0, 1.0))


# --------------------------------------------------------------------------
# Pair scorers
# --------------------------------------------------------------------------


def doc_vector_scorer(model: EmbeddingModel) -> PairScorer:
    """Cosine between trained document vectors, addressed by tag."""

    def score(tag_a: str, tag_b: str) -> float | None:
        return cosine(model.doc_vector(tag_a), model.doc_vector(tag_b))

    return score


def averaging_scorer(
    model: EmbeddingModel, docs: Mapping[str, Sequence[str]]
) -> PairScorer:
    """Cosine between the two documents' mean word vectors."""

    def score(tag_a: str, tag_b: str) -> float | None:
        index = model.vocabulary.index
        toks_a = [t for t in docs[tag_a] if t in index]
        toks_b = [t for t in docs[tag_b] if t in index]
        if not toks_a or not toks_b:
            return None
        return cosine(
            average_embedding(model, toks_a).values,
            average_embedding(model, toks_b).values,
        )

    return score


def ngram_scorer(
    docs: Mapping[str, Sequence[str]], max_order: int = DEFAULT_MAX_ORDER
) -> PairScorer:
    """Negated n-gram divergence over raw surface tokens."""

    def score(tag_a: str, tag_b: str) -> float | None:
        toks_a = docs[tag_a]
        toks_b = docs[tag_b]
        if not toks_a or not toks_b:
            return None
        return ngram_similarity(toks_a, toks_b, max_order)

    return score


def sentence_infer_scorer(
    model: EmbeddingModel, ip: InferParams, rng: np.random.Generator
) -> SentenceScorer:
    """Cosine between freshly inferred embeddings of the two sentences."""

    def score(toks_a: Sequence[str], toks_b: Sequence[str]) -> float | None:
        index = model.vocabulary.index
        if not any(t in index for t in toks_a) or not any(t in index for t in toks_b):
            return None
        va = infer_document(model, toks_a, ip, rng)
        vb = infer_document(model, toks_b, ip, rng)
        return cosine(va.values, vb.values)

    return score


def sentence_averaging_scorer(model: EmbeddingModel) -> SentenceScorer:
    def score(toks_a: Sequence[str], toks_b: Sequence[str]) -> float | None:
        index = model.vocabulary.index
        ta = [t for t in toks_a if t in index]
        tb = [t for t in toks_b if t in index]
        if not ta or not tb:
            return None
        return cosine(
            average_embedding(model, ta).values, average_embedding(model, tb).values
        )

    return score


def sentence_ngram_scorer(max_order: int = DEFAULT_MAX_ORDER) -> SentenceScorer:
    def score(toks_a: Sequence[str], toks_b: Sequence[str]) -> float | None:
        if not toks_a or not toks_b:
            return None
        return ngram_similarity(toks_a, toks_b, max_order)

    return score


# --------------------------------------------------------------------------
# Task protocols
# --------------------------------------------------------------------------


def read_qdup_pairs(path: str) -> list[tuple[str, str, int]]:
    """Parse a pairs file: ``tag_a<TAB>tag_b<TAB>label`` with label in {0,1}."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh.read().splitlines(), start=1):
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise EvaluationError(
                    f"{path}:{lineno}: expected 'tag_a<TAB>tag_b<TAB>0|1'"
                )
            pairs.append((parts[0], parts[1], int(parts[2])))
    return pairs


def run_qdup(scorer: PairScorer, pairs_path: str) -> EvalReport:
    """Score every labeled pair and rank-evaluate with ROC AUC."""
    raw = read_qdup_pairs(pairs_path)
    scored: list[ScoredPair] = []
    skipped = 0
    for tag_a, tag_b, label in raw:
        try:
            value = scorer(tag_a, tag_b)
        except KeyError as exc:
            raise EvaluationError(f"unknown document tag {exc.args[0]!r}") from exc
        if value is None:
            logger.warning("pair (%s, %s) not scorable; skipped", tag_a, tag_b)
            skipped += 1
            continue
        scored.append(ScoredPair(tag_a, tag_b, float(value), float(label)))
    if not scored:
        raise EvaluationError("no scorable pairs")
    value = roc_auc(scored)
    positives = sum(1 for p in scored if p.label == 1)
    return EvalReport(
        task="qdup", metric="auc", value=value,
        pairs=len(scored), skipped=skipped, positives=positives,
        pair_scores=scored,
    )


def read_sts_records(path: str) -> list[tuple[list[str], list[str], float]]:
    """Parse an STS file: ``sentence_a<TAB>sentence_b<TAB>gold`` with gold in [0,5]."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh.read().splitlines(), start=1):
            parts = line.split("\t")
            if len(parts) != 3:
                raise EvaluationError(
                    f"{path}:{lineno}: expected 'sentence_a<TAB>sentence_b<TAB>gold'"
                )
            try:
                gold = float(parts[2])
            except ValueError:
                raise EvaluationError(f"{path}:{lineno}: bad gold score {parts[2]!r}") from None
            if not (0.0 <= gold <= 5.0):
                raise EvaluationError(f"{path}:{lineno}: gold score {gold} outside [0,5]")
            records.append((parts[0].split(), parts[1].split(), gold))
    return records


def run_sts(scorer: SentenceScorer, sts_path: str) -> EvalReport:
    """Correlate predicted pair similarities with gold scores."""
    records = read_sts_records(sts_path)
    scores: list[float] = []
    golds: list[float] = []
    scored_pairs: list[ScoredPair] = []
    skipped = 0
    for i, (toks_a, toks_b, gold) in enumerate(records):
        value = scorer(toks_a, toks_b)
        if value is None:
            logger.warning("sts record %d not scorable; skipped", i + 1)
            skipped += 1
            continue
        scores.append(float(value))
        golds.append(gold)
        scored_pairs.append(ScoredPair(str(i), str(i), float(value), gold))
    if len(scores) < 2:
        raise EvaluationError("fewer than 2 scorable sts pairs")
    value = pearson(scores, golds)
    return EvalReport(
        task="sts", metric="pearson", value=value,
        pairs=len(scores), skipped=skipped, pair_scores=scored_pairs,
    )


# --------------------------------------------------------------------------
# Synthetic fixture generator
# --------------------------------------------------------------------------


@dataclass
class SyntheticData:
    """Desk-scale stand-in for a duplicate-detection / similarity benchmark."""

    documents: list[tuple[str, list[str]]]  # (tag, surface tokens)
    qdup_pairs: list[tuple[str, str, int]]
    sts_pairs: list[tuple[list[str], list[str], float]]
    topic_of: dict[str, int]
    content_words: list[list[str]]  # per topic
    function_words: list[str]


def _gen_tokens(
    rng: np.random.Generator,
    length: int,
    topic_words: list[str],
    function_words: list[str],
    function_mass: float,
) -> list[str]:
    out = []
    is_func = rng.random(length) < function_mass
    func_picks = rng.integers(0, len(function_words), size=length)
    word_picks = rng.integers(0, len(topic_words), size=length)
    for i in range(length):
        if is_func[i]:
            out.append(function_words[int(func_picks[i])])
        else:
            out.append(topic_words[int(word_picks[i])])
    return out


def make_synthetic(
    n_topics: int = 4,
    docs_per_topic: int = 200,
    doc_len: int = 40,
    vocab_per_topic: int = 60,
    n_function_words: int = 12,
    dup_fraction: float = 0.3,
    seed: int = 1,
    *,
    dropout: float = 0.1,
    function_mass: float = 0.4,
    negatives_per_positive: int = 10,
    sts_count: int = 60,
) -> SyntheticData:
    """Generate a topical corpus with duplicate pairs and graded sts pairs.

    Each topic owns a content vocabulary; function words are shared across
    topics and, being few, occur far more often per word type.  A duplicate
    is a same-topic near-copy of its source with per-token dropout; negative
    pairs cross topics.  Fully deterministic for a given seed.
    """
    if min(n_topics, docs_per_topic, doc_len, vocab_per_topic, n_function_words) < 1:
        raise ValueError("all synthetic corpus counts must be >= 1")
    if not (0.0 <= dup_fraction <= 1.0):
        raise ValueError("dup_fraction must be in [0,1]")
    rng = np.random.default_rng(seed)
    content = [
        [f"t{t}w{j}" for j in range(vocab_per_topic)] for t in range(n_topics)
    ]
    function_words = [f"fw{j}" for j in range(n_function_words)]

    documents: list[tuple[str, list[str]]] = []
    topic_of: dict[str, int] = {}
    for t in range(n_topics):
        for i in range(docs_per_topic):
            tag = f"t{t}d{i}"
            documents.append(
                (tag, _gen_tokens(rng, doc_len, content[t], function_words, function_mass))
            )
            topic_of[tag] = t

    n_dup = int(round(dup_fraction * docs_per_topic))
    positives: list[tuple[str, str, int]] = []
    by_tag = {tag: toks for tag, toks in documents}
    for t in range(n_topics):
        for i in range(n_dup):
            src_tag = f"t{t}d{i}"
            kept = [tok for tok in by_tag[src_tag] if rng.random() >= dropout]
            if not kept:
                kept = by_tag[src_tag][:1]
            dup_tag = f"{src_tag}dup"
            documents.append((dup_tag, kept))
            topic_of[dup_tag] = t
            positives.append((src_tag, dup_tag, 1))

    negatives: list[tuple[str, str, int]] = []
    n_neg = negatives_per_positive * max(1, len(positives))
    while len(negatives) < n_neg:
        ta, tb = rng.integers(0, n_topics, size=2)
        if ta == tb:
            continue
        da = int(rng.integers(0, docs_per_topic))
        db = int(rng.integers(0, docs_per_topic))
        negatives.append((f"t{ta}d{da}", f"t{tb}d{db}", 0))
    qdup_pairs = positives + negatives

    sts_pairs: list[tuple[list[str], list[str], float]] = []
    levels = [0.0, 0.25, 0.5, 0.75, 1.0]
    sent_len = max(8, doc_len // 3)
    for i in range(sts_count):
        r = levels[i % len(levels)]
        t = int(rng.integers(0, n_topics))
        other = (t + 1 + int(rng.integers(0, n_topics - 1))) % n_topics if n_topics > 1 else t
        sent_a = _gen_tokens(rng, sent_len, content[t], function_words, function_mass)
        n_keep = int(round(r * sent_len))
        tail = _gen_tokens(
            rng, sent_len - n_keep, content[other], function_words, function_mass
        )
        sent_b = sent_a[:n_keep] + tail
        sts_pairs.append((sent_a, sent_b, 5.0 * r))

    return SyntheticData(
        documents=documents,
        qdup_pairs=qdup_pairs,
        sts_pairs=sts_pairs,
        topic_of=topic_of,
        content_words=content,
        function_words=function_words,
    )


def write_synthetic(
    data: SyntheticData, corpus_path: str, pairs_path: str, sts_path: str
) -> None:
    """Write the fixture as a tagged-lines corpus, a pairs file, and an sts file."""
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for tag, tokens in data.documents:
            fh.write(tag + "\t" + " ".join(tokens) + "\n")
    with open(pairs_path, "w", encoding="utf-8") as fh:
        for tag_a, tag_b, label in data.qdup_pairs:
            fh.write(f"{tag_a}\t{tag_b}\t{label}\n")
    with open(sts_path, "w", encoding="utf-8") as fh:
        for toks_a, toks_b, gold in data.sts_pairs:
            fh.write(" ".join(toks_a) + "\t" + " ".join(toks_b) + f"\t{gold}\n")
