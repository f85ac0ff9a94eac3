"""Non-neural document scorers: word-vector averaging and n-gram divergence.

The n-gram baseline turns a document into a maximum-likelihood distribution
over its unigrams, bigrams, and trigrams and scores a pair by the negated
Jensen-Shannon divergence of the two distributions, so that higher means
more similar.  All functions here are pure.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .embedding import DocVector, EmbeddingModel
from .errors import EvaluationError

Ngram = tuple[str, ...]
NgramProfile = Mapping[Ngram, float]

DEFAULT_MAX_ORDER = 3


def average_embedding(model: EmbeddingModel, tokens: Sequence[str]) -> DocVector:
    """Component-wise mean of the in-vocabulary tokens' input word vectors."""
    index = model.vocabulary.index
    rows = [index[t] for t in tokens if t in index]
    if not rows:
        raise EvaluationError("cannot average: no in-vocabulary tokens")
    return DocVector(values=model.w_in[rows].mean(axis=0), tag="averaged")


def ngram_profile(tokens: Sequence[str], max_order: int = DEFAULT_MAX_ORDER) -> dict[Ngram, float]:
    """MLE distribution over all contiguous n-grams of orders 1..max_order."""
    if not tokens:
        raise EvaluationError("cannot build an n-gram profile of an empty document")
    counts: dict[Ngram, int] = {}
    n = len(tokens)
    for order in range(1, min(max_order, n) + 1):
        for i in range(n - order + 1):
            gram = tuple(tokens[i : i + order])
            counts[gram] = counts.get(gram, 0) + 1
    total = sum(counts.values())
    return {g: c / total for g, c in counts.items()}


def js_divergence(p: NgramProfile, q: NgramProfile) -> float:
    """Jensen-Shannon divergence in natural-log units; symmetric, in [0, ln 2].

    Iterates the union support in sorted order so the accumulation is
    identical under argument swap.  Grams absent from one side contribute
    only through the other side's KL term; no smoothing is needed.
    """
    total = 0.0
    for gram in sorted(set(p) | set(q)):
        pv = p.get(gram, 0.0)
        qv = q.get(gram, 0.0)
        m = 0.5 * (pv + qv)
        if pv > 0.0:
            total += 0.5 * pv * math.log(pv / m)
        if qv > 0.0:
            total += 0.5 * qv * math.log(qv / m)
    return total


def ngram_similarity(
    doc1: Sequence[str], doc2: Sequence[str], max_order: int = DEFAULT_MAX_ORDER
) -> float:
    """Negated divergence of the two documents' n-gram profiles; 0 is identical."""
    return -js_divergence(ngram_profile(doc1, max_order), ngram_profile(doc2, max_order))
