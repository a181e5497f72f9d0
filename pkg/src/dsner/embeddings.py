"""Pre-trained word-vector store with cosine-similarity queries."""
from __future__ import annotations

from pathlib import Path

import numpy as np


class EmbeddingError(ValueError):
    """Malformed embedding file."""


class EmbeddingTable:
    """Immutable word -> vector map with exact (optionally case-folded) lookup."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray], case_fold: bool = True):
        self.dim = dim
        self.case_fold = case_fold
        self._vectors: dict[str, np.ndarray] = {}
        for word, vec in vectors.items():
            key = self.fold(word)
            if key in self._vectors:
                continue  # duplicates keep the first occurrence
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dim,):
                raise EmbeddingError(f"vector for {word!r} has dimension {vec.shape}, expected ({dim},)")
            self._vectors[key] = vec

    def fold(self, word: str) -> str:
        return word.lower() if self.case_fold else word

    def lookup(self, word: str) -> np.ndarray | None:
        return self._vectors.get(self.fold(word))

    def __contains__(self, word: str) -> bool:
        return self.fold(word) in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def words(self) -> list[str]:
        return sorted(self._vectors)

    def cosine(self, a: str, b: str) -> float | None:
        """Cosine similarity of two words, or None if either is missing or zero-norm."""
        va, vb = self.lookup(a), self.lookup(b)
        if va is None or vb is None:
            return None
        na, nb = np.linalg.norm(va), np.linalg.norm(vb)
        if na == 0.0 or nb == 0.0:
            return None
        return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def load_embeddings(path: str | Path, case_fold: bool = True) -> EmbeddingTable:
    """Parse a GloVe-style text file: one word plus its components per line.

    An optional first line "count dim" (two integers) is treated as a header.
    Duplicate words keep their first occurrence.
    """
    path = Path(path)
    dim: int | None = None
    vectors: dict[str, np.ndarray] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    dim = int(parts[1])
                    int(parts[0])
                    continue
                except ValueError:
                    pass  # not a header after all
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                raise EmbeddingError(
                    f"{path}:{lineno}: row for {word!r} has {len(values)} components, expected {dim}"
                )
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingError(f"{path}:{lineno}: {exc}") from exc
            key = word.lower() if case_fold else word
            vectors.setdefault(key, vec)
    return EmbeddingTable(dim if dim is not None else 0, vectors, case_fold=case_fold)
