"""Candidate-span enumeration and exact decoding.

A sentence of N tokens yields every span of at most M words as a candidate;
decoding picks the non-overlapping, complete partition of 1..N minimizing the
total log-probability of the None type, then labels each chosen span with its
argmax type.  The dynamic program runs in O(N * min(M, N)) scored spans.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Sentence, SpanRef, TypeList
from .model import SpanClassifier

# Probabilities are floored before the log so a hard zero cannot poison the
# table with -inf arithmetic.
PROB_FLOOR = 1e-12


def candidate_count(n_tokens: int, max_words: int) -> int:
    """Number of spans of at most max_words in an n_tokens sentence."""
    if n_tokens < 1 or max_words < 1:
        raise ValueError("n_tokens and max_words must be positive")
    capped = min(max_words, n_tokens)
    return capped * (2 * n_tokens - capped + 1) // 2


@dataclass(frozen=True)
class CandidateSet:
    """All candidate spans of one sentence with their type distributions."""

    n_tokens: int
    max_words: int
    rows: dict[SpanRef, np.ndarray]

    def __post_init__(self) -> None:
        expected = candidate_count(self.n_tokens, self.max_words)
        if len(self.rows) != expected:
            raise ValueError(f"expected {expected} candidate rows, got {len(self.rows)}")
        for span, row in self.rows.items():
            if span.j > self.n_tokens or span.length > self.max_words:
                raise ValueError(f"illegal candidate span <{span.i}, {span.j}>")
            if row.min() < 0 or abs(float(row.sum()) - 1.0) > 1e-6:
                raise ValueError(f"candidate row for <{span.i}, {span.j}> is not a distribution")

    def none_prob(self, span: SpanRef) -> float:
        # None is pinned to the last slot of every type list.
        return float(self.rows[span][-1])


@dataclass(frozen=True)
class Partition:
    """Disjoint, complete division of 1..N into spans, with its objective value."""

    spans: tuple[SpanRef, ...]
    objective: float

    def __post_init__(self) -> None:
        if not self.spans:
            raise ValueError("a partition needs at least one span")
        if self.spans[0].i != 1:
            raise ValueError("partition must start at token 1")
        for prev, cur in zip(self.spans, self.spans[1:]):
            if prev.j + 1 != cur.i:
                raise ValueError(f"gap or overlap between <{prev.i}, {prev.j}> and <{cur.i}, {cur.j}>")


@dataclass
class DpTrace:
    """Forward table of the decoder: best[j] is the optimal objective for 1..j."""

    best: np.ndarray
    parent: np.ndarray
    iterations: int


def generate_candidates(sentence: Sentence, model: SpanClassifier, max_words: int) -> CandidateSet:
    if max_words < 1:
        raise ValueError("max_words must be >= 1")
    n = len(sentence)
    spans = [SpanRef(i, j) for i in range(1, n + 1) for j in range(i, min(i + max_words - 1, n) + 1)]
    probs = model.predict_spans(sentence, spans)
    return CandidateSet(n, max_words, {span: probs[r] for r, span in enumerate(spans)})


def dp_forward(cands: CandidateSet) -> DpTrace:
    """Fill the segmentation table; ties prefer the earliest split point."""
    n = cands.n_tokens
    capped = min(cands.max_words, n)
    best = np.zeros(n + 1)
    parent = np.zeros(n + 1, dtype=np.int64)
    iterations = 0
    for j in range(1, n + 1):
        best_cost = np.inf
        best_i = 0
        for i in range(max(1, j - capped + 1), j + 1):
            iterations += 1
            cost = best[i - 1] + np.log(max(cands.none_prob(SpanRef(i, j)), PROB_FLOOR))
            if cost < best_cost:
                best_cost = cost
                best_i = i
        best[j] = best_cost
        parent[j] = best_i
    return DpTrace(best, parent, iterations)


def dp_partition(cands: CandidateSet) -> Partition:
    trace = dp_forward(cands)
    spans: list[SpanRef] = []
    j = cands.n_tokens
    while j > 0:
        i = int(trace.parent[j])
        spans.append(SpanRef(i, j))
        j = i - 1
    spans.reverse()
    return Partition(tuple(spans), float(trace.best[cands.n_tokens]))


def label_spans(
    partition: Partition, cands: CandidateSet, types: TypeList
) -> list[tuple[SpanRef, int]]:
    """Argmax type per partition span; spans judged non-entities are dropped."""
    out: list[tuple[SpanRef, int]] = []
    for span in partition.spans:
        label = int(np.argmax(cands.rows[span]))
        if label != types.none_index:
            out.append((span, label))
    return out


def predict_sentence(
    sentence: Sentence, model: SpanClassifier, max_words: int
) -> list[tuple[SpanRef, int]]:
    """Full decode: enumerate, partition, label.  Output is sorted and disjoint."""
    cands = generate_candidates(sentence, model, max_words)
    return label_spans(dp_partition(cands), cands, model.types)


def predict_corpus(
    sentences: Sequence[Sentence], model: SpanClassifier, max_words: int
) -> list[list[tuple[SpanRef, int]]]:
    return [predict_sentence(sentence, model, max_words) for sentence in sentences]
