"""Data model and file I/O for tokenized corpora, gold annotations, and predictions.

Token indices are 1-based and inclusive on both ends throughout the package;
conversion to Python's 0-based slices is an internal concern of each function.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class CorpusError(ValueError):
    """Malformed corpus file or invalid span annotation."""


@dataclass(frozen=True)
class TypeList:
    """Ordered inventory of entity types; the non-entity label is always last.

    ``labels[-1]`` is the non-entity ("none") label.  Pre-defined types are
    everything before it and are the only legal gold/prediction types.
    """

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.labels) < 2:
            raise ValueError("need at least one pre-defined type plus the none type")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate type names in {self.labels!r}")

    @classmethod
    def with_none(cls, predefined: Iterable[str], none_label: str = "None") -> "TypeList":
        return cls(tuple(predefined) + (none_label,))

    @property
    def none_index(self) -> int:
        return len(self.labels) - 1

    @property
    def none_label(self) -> str:
        return self.labels[-1]

    @property
    def predefined(self) -> tuple[str, ...]:
        return self.labels[:-1]

    def __len__(self) -> int:
        return len(self.labels)

    def predefined_index(self, label: str) -> int:
        """Index of a pre-defined type name; the none label is rejected."""
        if label == self.none_label:
            raise ValueError(f"{label!r} is the none type, not a pre-defined type")
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"unknown type {label!r}; expected one of {self.predefined}") from None


@dataclass(frozen=True, order=True)
class SpanRef:
    """Inclusive token span <i, j>, 1-based."""

    i: int
    j: int

    def __post_init__(self) -> None:
        if not 1 <= self.i <= self.j:
            raise ValueError(f"invalid span <{self.i}, {self.j}>")

    @property
    def length(self) -> int:
        return self.j - self.i + 1

    def overlaps(self, other: "SpanRef") -> bool:
        return not (self.j < other.i or other.j < self.i)


@dataclass
class Sentence:
    """A tokenized sentence with optional gold spans.

    Gold spans are ``(SpanRef, type_index)`` pairs where the type index points
    into a :class:`TypeList` and is never the none type.
    """

    tokens: tuple[str, ...]
    doc_id: str = ""
    gold: list[tuple[SpanRef, int]] | None = None

    def __post_init__(self) -> None:
        self.tokens = tuple(self.tokens)
        if not self.tokens:
            raise CorpusError("sentence must contain at least one token")
        if self.gold is not None:
            self._check_gold(self.gold)

    def _check_gold(self, gold: list[tuple[SpanRef, int]]) -> None:
        n = len(self.tokens)
        for span, type_index in gold:
            if span.j > n:
                raise CorpusError(f"gold span <{span.i}, {span.j}> exceeds sentence length {n}")
            if type_index < 0:
                raise CorpusError(f"negative type index {type_index}")
        spans = sorted(s for s, _ in gold)
        for a, b in zip(spans, spans[1:]):
            if a.overlaps(b):
                raise CorpusError(f"overlapping gold spans <{a.i},{a.j}> and <{b.i},{b.j}>")

    def __len__(self) -> int:
        return len(self.tokens)


def spans_to_bio(spans: Sequence[tuple[SpanRef, int]], n_tokens: int, types: TypeList) -> list[str]:
    """Render non-overlapping typed spans as one BIO tag per token."""
    tags = ["O"] * n_tokens
    for span, type_index in spans:
        label = types.labels[type_index]
        tags[span.i - 1] = f"B-{label}"
        for t in range(span.i, span.j):
            tags[t] = f"I-{label}"
    return tags


def bio_to_spans(tags: Sequence[str], types: TypeList) -> list[tuple[SpanRef, int]]:
    """Parse BIO tags back into typed spans; rejects dangling I- tags."""
    spans: list[tuple[SpanRef, int]] = []
    start = 0
    current: str | None = None
    for pos, tag in enumerate(tags, start=1):
        if tag == "O":
            prefix, label = "O", None
        elif len(tag) > 2 and tag[1] == "-" and tag[0] in "BI":
            prefix, label = tag[0], tag[2:]
        else:
            raise CorpusError(f"malformed BIO tag {tag!r}")
        if current is not None and (prefix in ("O", "B") or label != current):
            spans.append((SpanRef(start, pos - 1), types.predefined_index(current)))
            current = None
        if prefix == "B":
            start, current = pos, label
        elif prefix == "I" and current is None:
            raise CorpusError(f"I-{label} tag at token {pos} without a preceding B-{label}")
    if current is not None:
        spans.append((SpanRef(start, len(tags)), types.predefined_index(current)))
    return spans


def _sentence_from_json(obj: dict, types: TypeList, default_id: str) -> Sentence:
    tokens = obj.get("tokens")
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise CorpusError('"tokens" must be a list of strings')
    gold = None
    if obj.get("gold") is not None:
        gold = []
        for entry in obj["gold"]:
            if len(entry) != 3:
                raise CorpusError(f"gold entry {entry!r} is not [i, j, type]")
            i, j, label = entry
            gold.append((SpanRef(int(i), int(j)), types.predefined_index(label)))
    return Sentence(tuple(tokens), doc_id=str(obj.get("doc_id", default_id)), gold=gold)


def _load_jsonl(path: Path, types: TypeList) -> list[Sentence]:
    sentences = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                sentences.append(_sentence_from_json(obj, types, default_id=f"s{len(sentences)}"))
            except (ValueError, TypeError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
    return sentences


def _load_conll(path: Path, types: TypeList) -> list[Sentence]:
    sentences = []
    tokens: list[str] = []
    tags: list[str] = []
    block_start = 1

    def flush(lineno: int) -> None:
        nonlocal tokens, tags
        if not tokens:
            return
        try:
            gold = bio_to_spans(tags, types)
            sentences.append(Sentence(tuple(tokens), doc_id=f"s{len(sentences)}", gold=gold))
        except (CorpusError, ValueError) as exc:
            raise CorpusError(f"{path}:{block_start}-{lineno}: {exc}") from exc
        tokens, tags = [], []

    with path.open(encoding="utf-8") as fh:
        lineno = 0
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush(lineno)
                block_start = lineno + 1
                continue
            parts = line.split()
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: expected 'token tag', got {line!r}")
            tokens.append(parts[0])
            tags.append(parts[1])
        flush(lineno)
    return sentences


def load_corpus(path: str | Path, fmt: str = "jsonl", *, types: TypeList) -> list[Sentence]:
    """Load a corpus in ``jsonl`` or ``conll`` format, validating gold spans."""
    path = Path(path)
    if fmt == "jsonl":
        return _load_jsonl(path, types)
    if fmt == "conll":
        return _load_conll(path, types)
    raise ValueError(f"unknown corpus format {fmt!r}")


def write_predictions(
    sentences: Sequence[Sentence],
    predictions: Sequence[Sequence[tuple[SpanRef, int]]],
    path: str | Path,
    *,
    types: TypeList,
) -> None:
    """Write one JSONL line per sentence with its predicted spans sorted by start.

    The output uses the corpus schema (predictions in the ``gold`` slot), so a
    prediction file can be re-loaded with :func:`load_corpus` for scoring.
    """
    if len(sentences) != len(predictions):
        raise ValueError(f"{len(sentences)} sentences but {len(predictions)} prediction lists")
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for sentence, preds in zip(sentences, predictions):
            rows = [[s.i, s.j, types.labels[t]] for s, t in sorted(preds)]
            obj = {"doc_id": sentence.doc_id, "tokens": list(sentence.tokens), "gold": rows}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
