"""Corpus ingestion, vocabulary construction, and noise sampling.

A corpus file holds one document per line.  Two layouts are supported:

* ``tagged-lines``: ``tag<TAB>token token ...`` — the leading tab-separated
  field names the document.
* ``plain-lines``: whitespace-separated tokens; the 0-based line number
  (rendered as text) becomes the tag.

Tokens are used verbatim; lowercasing and tokenization are expected to have
happened upstream.  Out-of-vocabulary tokens are dropped when documents are
mapped to vocabulary positions, but the pre-drop token count is kept on the
corpus for reporting.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CorpusError, VocabularyError

logger = logging.getLogger(__name__)

CORPUS_FORMATS = ("tagged-lines", "plain-lines")

NOISE_EXPONENT = 0.75


def keep_probability(count: int, total: int, t: float) -> float:
    """Probability of keeping one occurrence of a token during subsampling.

    With corpus frequency f = count/total, returns min(1, sqrt(t/f)).
    Tokens at or below the threshold frequency are never discarded.
    """
    f = count / total
    if f <= t:
        return 1.0
    return math.sqrt(t / f)


@dataclass(frozen=True)
class VocabEntry:
    surface: str
    count: int
    keep_prob: float
    noise_weight: float


class Vocabulary:
    """Frequency-filtered token table, ordered by descending count.

    Ties in count keep first-seen order, which makes builds deterministic.
    Immutable after construction; safe to share across workers.
    """

    def __init__(self, entries: Sequence[VocabEntry]):
        self.entries: list[VocabEntry] = list(entries)
        self.index: dict[str, int] = {e.surface: i for i, e in enumerate(self.entries)}
        if len(self.index) != len(self.entries):
            raise VocabularyError("duplicate surface forms in vocabulary")
        self.total_tokens: int = sum(e.count for e in self.entries)

    @classmethod
    def from_ordered_counts(
        cls, pairs: Sequence[tuple[str, int]], subsample_t: float
    ) -> "Vocabulary":
        """Build from (surface, count) pairs whose order is already canonical."""
        total = sum(c for _, c in pairs)
        entries = [
            VocabEntry(
                surface=s,
                count=c,
                keep_prob=keep_probability(c, total, subsample_t),
                noise_weight=c**NOISE_EXPONENT,
            )
            for s, c in pairs
        ]
        return cls(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, surface: str) -> bool:
        return surface in self.index

    def position(self, surface: str) -> int:
        return self.index[surface]

    def keep_probs(self) -> np.ndarray:
        """Per-position keep probabilities as a float64 array."""
        return np.array([e.keep_prob for e in self.entries], dtype=np.float64)


def build_vocabulary(
    tokens: Iterable[str], min_count: int, subsample_t: float
) -> Vocabulary:
    """Count a token stream and keep types occurring at least min_count times.

    Retained types get a subsampling keep probability and a noise weight of
    count**0.75.  Raises when nothing survives the threshold.
    """
    if min_count < 1:
        raise VocabularyError(f"min_count must be >= 1, got {min_count}")
    if subsample_t <= 0:
        raise VocabularyError(f"subsample threshold must be > 0, got {subsample_t}")
    counts = Counter(tokens)
    kept = [(s, c) for s, c in counts.items() if c >= min_count]
    if not kept:
        raise VocabularyError("no tokens survive min_count")
    # Stable sort: equal counts stay in first-seen order.
    kept.sort(key=lambda sc: -sc[1])
    return Vocabulary.from_ordered_counts(kept, subsample_t)


@dataclass
class Document:
    """One corpus document: a unique tag and vocabulary positions of its tokens."""

    tag: str
    tokens: np.ndarray  # int32 vocabulary positions, OOV already dropped


@dataclass
class Corpus:
    vocabulary: Vocabulary
    documents: list[Document]
    total_token_count: int  # raw count before OOV dropping


class NoiseTable:
    """Cumulative distribution over vocabulary positions for negative sampling.

    Sampling probabilities are proportional to each entry's noise weight
    (count**0.75).  Immutable and shareable; callers supply their own RNG.
    """

    def __init__(self, weights: Sequence[float]):
        w = np.asarray(weights, dtype=np.float64)
        if w.size == 0:
            raise VocabularyError("cannot build a noise table over an empty vocabulary")
        if np.any(w < 0):
            raise VocabularyError("noise weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise VocabularyError("noise weights sum to zero")
        self.cumulative = np.cumsum(w / total)
        # Guard against cumsum rounding drift; the last bin must cover u -> 1.
        assert abs(self.cumulative[-1] - 1.0) < 1e-9
        self.cumulative[-1] = 1.0

    @classmethod
    def from_vocabulary(cls, vocab: Vocabulary) -> "NoiseTable":
        return cls([e.noise_weight for e in vocab.entries])

    def __len__(self) -> int:
        return len(self.cumulative)

    def sample_many(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n positions in one vectorized call (one rng consumption)."""
        u = rng.random(n)
        return np.searchsorted(self.cumulative, u, side="right").astype(np.int64)


def sample_noise(table: NoiseTable, rng: np.random.Generator) -> int:
    """Draw a single vocabulary position from the noise distribution."""
    u = rng.random()
    return int(np.searchsorted(table.cumulative, u, side="right"))


def parse_corpus_lines(lines: Iterable[str], fmt: str) -> list[tuple[str, list[str]]]:
    """Split raw lines into (tag, surface tokens) per the corpus format.

    Duplicate tags are fatal; a tag with zero tokens is kept as an empty
    document and flagged with a warning.
    """
    if fmt not in CORPUS_FORMATS:
        raise CorpusError(f"unknown corpus format {fmt!r}; expected one of {CORPUS_FORMATS}")
    docs: list[tuple[str, list[str]]] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines):
        if fmt == "tagged-lines":
            tag, _, rest = line.partition("\t")
            tokens = rest.split()
        else:
            tag = str(lineno)
            tokens = line.split()
        if tag in seen:
            raise CorpusError(f"duplicate document tag {tag!r} (line {lineno + 1})")
        seen.add(tag)
        if not tokens:
            logger.warning("document %r has no tokens; kept as empty", tag)
        docs.append((tag, tokens))
    return docs


def build_corpus(
    docs: Sequence[tuple[str, Sequence[str]]], min_count: int, subsample_t: float
) -> Corpus:
    """Assemble a corpus from in-memory (tag, tokens) documents.

    Builds the vocabulary over all tokens, then maps each document to
    vocabulary positions, dropping OOV tokens.  An input with documents but
    no surviving vocabulary is an error; a fully empty input yields a
    degenerate corpus that training will later reject.
    """
    total_raw = sum(len(tokens) for _, tokens in docs)
    if total_raw == 0:
        return Corpus(vocabulary=Vocabulary([]), documents=[
            Document(tag=t, tokens=np.empty(0, dtype=np.int32)) for t, _ in docs
        ], total_token_count=0)
    vocab = build_vocabulary(
        (tok for _, tokens in docs for tok in tokens), min_count, subsample_t
    )
    documents = []
    for tag, tokens in docs:
        ids = [vocab.index[t] for t in tokens if t in vocab.index]
        documents.append(Document(tag=tag, tokens=np.array(ids, dtype=np.int32)))
    return Corpus(vocabulary=vocab, documents=documents, total_token_count=total_raw)


def load_corpus(
    path: str,
    fmt: str = "tagged-lines",
    *,
    min_count: int = 5,
    subsample_t: float = 1e-5,
) -> Corpus:
    """Read a corpus file and assemble vocabulary plus id-mapped documents."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path!r}: {exc}") from exc
    docs = parse_corpus_lines(lines, fmt)
    return build_corpus(docs, min_count=min_count, subsample_t=subsample_t)


def read_tagged_tokens(path: str, fmt: str = "tagged-lines") -> dict[str, list[str]]:
    """Read raw surface tokens per tag, without any vocabulary filtering.

    Baseline scorers that operate on surface forms (n-gram similarity) need
    the unfiltered text.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path!r}: {exc}") from exc
    return {tag: tokens for tag, tokens in parse_corpus_lines(lines, fmt)}


def export_vocabulary(vocab: Vocabulary, path: str) -> None:
    """Write ``surface<TAB>count`` lines in descending-count order."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in vocab.entries:
            fh.write(f"{e.surface}\t{e.count}\n")


def read_vocabulary(path: str, subsample_t: float) -> Vocabulary:
    """Rebuild a vocabulary from an export; file order is the entry order."""
    pairs: list[tuple[str, int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh.read().splitlines(), start=1):
            parts = line.split("\t")
            if len(parts) != 2:
                raise VocabularyError(f"{path}:{lineno}: expected 'surface<TAB>count'")
            try:
                pairs.append((parts[0], int(parts[1])))
            except ValueError as exc:
                raise VocabularyError(f"{path}:{lineno}: bad count {parts[1]!r}") from exc
    return Vocabulary.from_ordered_counts(pairs, subsample_t)
