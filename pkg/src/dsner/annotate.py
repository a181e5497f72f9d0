"""Weighted pseudo-annotation of raw sentences and training-span sampling."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Sentence, SpanRef, TypeList
from .lexicon import ExtConfig, ExtDictEntry, annotation_weight, headword


@dataclass
class WeightedSpan:
    """A span plus one annotation weight per type (none type last)."""

    span: SpanRef
    weights: np.ndarray

    def is_negative(self) -> bool:
        return self.weights[-1] == 1.0


def validate_weighted_span(ws: WeightedSpan, types: TypeList) -> None:
    """Enforce the positive/negative weight-vector shape at pipeline boundaries."""
    w = ws.weights
    if w.shape != (len(types),):
        raise ValueError(f"weight vector has shape {w.shape}, expected ({len(types)},)")
    if np.any(w < 0.0) or np.any(w > 1.0):
        raise ValueError(f"weights outside [0, 1]: {w}")
    if w[-1] == 0.0:
        if not np.any(w[:-1] > 0.0):
            raise ValueError("positive span must weight at least one pre-defined type")
    elif w[-1] == 1.0:
        if np.any(w[:-1] != 0.0):
            raise ValueError("negative span must weight only the none type")
    else:
        raise ValueError(f"none-type weight must be 0 or 1, got {w[-1]}")


@dataclass
class AnnotatedSentence:
    """A sentence with non-overlapping positive spans and sampled negative spans."""

    sentence: Sentence
    positives: list[WeightedSpan]
    negatives: list[WeightedSpan] = field(default_factory=list)


def annotate(
    sentence: Sentence,
    entries: Sequence[ExtDictEntry],
    cfg: ExtConfig,
    types: TypeList,
    case_fold: bool = False,
) -> list[WeightedSpan]:
    """Greedy longest-first exact matching of extended-dictionary mentions.

    Mentions are tried longest first (ties by token order, occurrences left to
    right); a match is claimed only if it does not overlap an already-claimed
    span, so the output is never nested or overlapping.  Each claimed span is
    weighted per matching type: weight 1 when the mention (or its headword,
    same type) is backed by a similarity-1 entry, otherwise the sigmoid ramp
    of that type's similarity.
    """
    fold = (lambda w: w.lower()) if case_fold else (lambda w: w)

    by_mention: dict[tuple[str, ...], dict[int, float]] = {}
    original_headwords: set[tuple[str, int]] = set()
    for e in entries:
        key = tuple(fold(t) for t in e.mention)
        slot = by_mention.setdefault(key, {})
        slot[e.type_index] = max(slot.get(e.type_index, 0.0), e.similarity)
        if e.similarity == 1.0:
            original_headwords.add((fold(headword(e.mention)), e.type_index))

    tokens = [fold(t) for t in sentence.tokens]
    positions: dict[str, list[int]] = {}
    for pos, tok in enumerate(tokens):
        positions.setdefault(tok, []).append(pos)

    claimed: list[WeightedSpan] = []
    for mention in sorted(by_mention, key=lambda m: (-len(m), m)):
        n = len(mention)
        for start in positions.get(mention[0], []):
            if start + n > len(tokens) or tokens[start : start + n] != list(mention):
                continue
            span = SpanRef(start + 1, start + n)
            if any(span.overlaps(ws.span) for ws in claimed):
                continue
            hw = fold(headword(mention))
            weights = np.zeros(len(types))
            for type_index, s in by_mention[mention].items():
                if s == 1.0 or (hw, type_index) in original_headwords:
                    weights[type_index] = 1.0
                else:
                    weights[type_index] = annotation_weight(s, cfg)
            ws = WeightedSpan(span, weights)
            validate_weighted_span(ws, types)
            claimed.append(ws)
    claimed.sort(key=lambda ws: ws.span)
    return claimed


def annotate_corpus(
    sentences: Sequence[Sentence],
    entries: Sequence[ExtDictEntry],
    cfg: ExtConfig,
    types: TypeList,
    case_fold: bool = False,
) -> list[AnnotatedSentence]:
    return [AnnotatedSentence(s, annotate(s, entries, cfg, types, case_fold)) for s in sentences]


def sample_training_spans(
    annotated: Sequence[AnnotatedSentence],
    max_span_words: int,
    ratio: float,
    seed: int,
    types: TypeList,
) -> list[AnnotatedSentence]:
    """Draw negative spans uniformly across the corpus at ``ratio`` per positive.

    Candidates are all spans of at most ``max_span_words`` tokens that are not
    identical to a positive span (overlap with positives is allowed).  If
    fewer candidates exist than requested, all are taken.  Sampling is
    deterministic for a fixed seed.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    if max_span_words < 1:
        raise ValueError("max_span_words must be >= 1")

    candidates: list[tuple[int, SpanRef]] = []
    n_pos = 0
    for idx, ann in enumerate(annotated):
        n_pos += len(ann.positives)
        taken = {ws.span for ws in ann.positives}
        n = len(ann.sentence)
        for i in range(1, n + 1):
            for j in range(i, min(i + max_span_words, n + 1)):
                span = SpanRef(i, j)
                if span not in taken:
                    candidates.append((idx, span))

    wanted = min(int(round(ratio * n_pos)), len(candidates))
    rng = random.Random(seed)
    chosen = rng.sample(candidates, wanted) if wanted else []

    negative = np.zeros(len(types))
    negative[-1] = 1.0
    by_sentence: dict[int, list[SpanRef]] = {}
    for idx, span in chosen:
        by_sentence.setdefault(idx, []).append(span)
    out = []
    for idx, ann in enumerate(annotated):
        negatives = [WeightedSpan(s, negative.copy()) for s in sorted(by_sentence.get(idx, []))]
        out.append(AnnotatedSentence(ann.sentence, list(ann.positives), negatives))
    return out


def annotation_quality(annotated: Sequence[AnnotatedSentence]) -> tuple[float, float]:
    """Span-level exact-match precision/recall of positives against gold.

    A positive counts as correct if some gold span has identical boundaries
    and its type is among the positive's annotated types.  Empty-annotation
    precision is 1.0 by convention; empty-gold recall is 1.0.
    """
    n_annotated = 0
    n_gold = 0
    n_correct = 0
    for ann in annotated:
        gold = ann.sentence.gold
        if gold is None:
            raise ValueError(f"sentence {ann.sentence.doc_id!r} carries no gold annotation")
        gold_types = {span: t for span, t in gold}
        n_gold += len(gold)
        n_annotated += len(ann.positives)
        for ws in ann.positives:
            t = gold_types.get(ws.span)
            if t is not None and ws.weights[t] > 0.0:
                n_correct += 1
    precision = n_correct / n_annotated if n_annotated else 1.0
    recall = n_correct / n_gold if n_gold else 1.0
    return precision, recall


def save_annotated(annotated: Sequence[AnnotatedSentence], path: str | Path, *, types: TypeList) -> None:
    """Write the annotated-corpus cache: JSONL with per-span weight vectors."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for ann in annotated:
            obj: dict = {
                "doc_id": ann.sentence.doc_id,
                "tokens": list(ann.sentence.tokens),
                "positives": [[w.span.i, w.span.j, list(w.weights)] for w in ann.positives],
            }
            if ann.negatives:
                obj["negatives"] = [[w.span.i, w.span.j, list(w.weights)] for w in ann.negatives]
            if ann.sentence.gold is not None:
                obj["gold"] = [[s.i, s.j, types.labels[t]] for s, t in sorted(ann.sentence.gold)]
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_annotated(path: str | Path, *, types: TypeList) -> list[AnnotatedSentence]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                gold = None
                if obj.get("gold") is not None:
                    gold = [(SpanRef(i, j), types.predefined_index(lbl)) for i, j, lbl in obj["gold"]]
                sentence = Sentence(tuple(obj["tokens"]), doc_id=str(obj.get("doc_id", "")), gold=gold)

                def parse(rows: list) -> list[WeightedSpan]:
                    spans = [WeightedSpan(SpanRef(i, j), np.asarray(w, dtype=np.float64)) for i, j, w in rows]
                    for ws in spans:
                        validate_weighted_span(ws, types)
                    return spans

                out.append(
                    AnnotatedSentence(sentence, parse(obj["positives"]), parse(obj.get("negatives", [])))
                )
            except (ValueError, TypeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out
