"""Headword extraction, similarity-based dictionary extension, and annotation weights."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import TypeList
from .embeddings import EmbeddingTable

# Closed set of prepositions used by the headword rule.
PREPOSITIONS = frozenset({"of", "in", "on", "for", "with", "to", "at", "by", "from"})


@dataclass(frozen=True)
class DictEntry:
    """An original-dictionary record: mention tokens plus a pre-defined type."""

    mention: tuple[str, ...]
    type_index: int


@dataclass(frozen=True)
class ExtDictEntry:
    """Extended-dictionary record; ``similarity`` is 1.0 for copied originals."""

    mention: tuple[str, ...]
    type_index: int
    similarity: float


@dataclass
class ExtConfig:
    """Dictionary-extension and annotation-weight hyper-parameters.

    ``tau1`` prunes infrequent headwords, ``tau2`` prunes dissimilar headword
    matches, ``theta1``/``theta2`` shape the annotation-weight curve.  With
    ``strict_tau1`` a headword must occur strictly more than ``tau1`` times
    among dictionary entries to qualify.
    """

    tau1: int = 5
    tau2: float = 0.4
    theta1: float = 1.0
    theta2: float = -0.5
    strict_tau1: bool = True

    def __post_init__(self) -> None:
        if self.tau1 < 1:
            raise ValueError("tau1 must be >= 1")


def headword(phrase: Sequence[str]) -> str:
    """Last word of a phrase, or the word right before its first preposition.

    Falls back to the last word when the phrase starts with a preposition.
    """
    if not phrase:
        raise ValueError("empty phrase has no headword")
    for pos, word in enumerate(phrase):
        if word.lower() in PREPOSITIONS:
            if pos == 0:
                break
            return phrase[pos - 1]
    return phrase[-1]


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def annotation_weight(s: float, cfg: ExtConfig) -> float:
    """Confidence weight for a match of similarity ``s``: exactly 1 at s=1,
    otherwise a sigmoid ramp in s."""
    if not 0.0 < s <= 1.0:
        raise ValueError(f"similarity {s} outside (0, 1]")
    if s == 1.0:
        return 1.0
    return sigmoid(cfg.theta1 * s + cfg.theta2)


def frequent_headwords(entries: Iterable[DictEntry], cfg: ExtConfig, table: EmbeddingTable) -> set[str]:
    """Headwords occurring often enough among dictionary entries (each entry counts once)."""
    counts = Counter(table.fold(headword(e.mention)) for e in entries)
    if cfg.strict_tau1:
        return {h for h, c in counts.items() if c > cfg.tau1}
    return {h for h, c in counts.items() if c >= cfg.tau1}


def extend_dictionary(
    entries: Sequence[DictEntry],
    phrases: Sequence[tuple[str, ...]],
    cfg: ExtConfig,
    table: EmbeddingTable,
) -> list[ExtDictEntry]:
    """Assign types to untyped phrases by headword similarity against the dictionary.

    For each phrase, scan entries whose headword is frequent and at least
    ``tau2``-similar to the phrase headword; keep the type set attaining the
    maximum similarity (ties keep all tied types).  All original entries are
    appended with similarity 1.  Phrases with out-of-vocabulary or filtered
    headwords contribute nothing.  Duplicate (mention, type) pairs keep the
    maximum similarity, and per mention only the maximum-similarity group of
    entries survives, so every mention has a single similarity value.
    """
    frequent = frequent_headwords(entries, cfg, table)
    # precompute per-entry headwords once; the phrase loop is a linear scan over D
    entry_heads = [table.fold(headword(e.mention)) for e in entries]

    best: dict[tuple[tuple[str, ...], int], float] = {}
    for phrase in phrases:
        hp = headword(phrase)
        s = 0.0
        matched: set[int] = set()
        for entry, he in zip(entries, entry_heads):
            if he not in frequent:
                continue
            sim = table.cosine(hp, he)
            if sim is None or sim < cfg.tau2:
                continue
            if sim > s:
                s = sim
                matched = {entry.type_index}
            elif sim == s:
                matched.add(entry.type_index)
        if s <= 0.0:
            continue  # a qualifying match at similarity exactly 0 yields no entry
        for type_index in matched:
            key = (tuple(phrase), type_index)
            best[key] = max(best.get(key, 0.0), s)
    for entry in entries:
        best[(entry.mention, entry.type_index)] = 1.0

    top: dict[tuple[str, ...], float] = {}
    for (mention, _), s in best.items():
        top[mention] = max(top.get(mention, 0.0), s)
    result = [
        ExtDictEntry(mention, type_index, s)
        for (mention, type_index), s in best.items()
        if s == top[mention]
    ]
    result.sort(key=lambda e: (e.mention, e.type_index))
    return result


def load_dictionary(path: str | Path, types: TypeList) -> list[DictEntry]:
    """Read a TSV dictionary: ``mention<TAB>type`` with space-separated mention tokens."""
    entries = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'mention<TAB>type', got {line!r}")
            mention = tuple(parts[0].split())
            if not mention:
                raise ValueError(f"{path}:{lineno}: empty mention")
            entries.append(DictEntry(mention, types.predefined_index(parts[1])))
    return entries


def save_extended(entries: Sequence[ExtDictEntry], types: TypeList, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"{' '.join(e.mention)}\t{types.labels[e.type_index]}\t{e.similarity:.6f}\n")


def load_extended(path: str | Path, types: TypeList) -> list[ExtDictEntry]:
    entries = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'mention<TAB>type<TAB>s', got {line!r}")
            mention = tuple(parts[0].split())
            entries.append(ExtDictEntry(mention, types.predefined_index(parts[1]), float(parts[2])))
    return entries


def load_phrases(path: str | Path) -> list[tuple[str, ...]]:
    """Read a phrase file: one space-tokenized phrase per line, blanks skipped."""
    with Path(path).open(encoding="utf-8") as fh:
        return [tuple(line.split()) for line in fh if line.strip()]
