"""Word vectors in the plain-text word2vec layout ("V D" header, then "word v1 ... vD")."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimMismatch, FormatError


@dataclass
class EmbeddingTable:
    words: list[str]
    matrix: np.ndarray  # V x D
    oov_vector: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.oov_vector = np.asarray(self.oov_vector, dtype=float)
        self.index = {w: i for i, w in enumerate(self.words)}
        if self.matrix.shape != (len(self.words), self.oov_vector.shape[0]):
            raise DimMismatch(f"matrix shape {self.matrix.shape} does not match vocabulary/dim")
        if not (np.all(np.isfinite(self.matrix)) and np.all(np.isfinite(self.oov_vector))):
            raise FormatError("embedding vectors must be finite")

    @property
    def dim(self) -> int:
        return self.oov_vector.shape[0]

    @property
    def oov_id(self) -> int:
        return len(self.words)

    @property
    def pad_id(self) -> int:
        return len(self.words) + 1

    def vectors(self) -> dict[str, np.ndarray]:
        return {w: self.matrix[i] for i, w in enumerate(self.words)}

    def lookup_table(self) -> np.ndarray:
        """Rows for every word, then the OOV row, then an all-zero pad row."""
        return np.vstack([self.matrix, self.oov_vector, np.zeros(self.dim)])

    def ids(self, tokens: Sequence[str]) -> np.ndarray:
        oov = self.oov_id
        return np.array([self.index.get(t, oov) for t in tokens], dtype=np.int64)

    @classmethod
    def from_vectors(cls, vectors: dict[str, Sequence[float]]) -> "EmbeddingTable":
        words = list(vectors)
        matrix = np.array([vectors[w] for w in words], dtype=float)
        return cls(words, matrix, matrix.mean(axis=0))


def load_embeddings(path: str | Path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError("first line must be 'vocab_size dim'")
        try:
            vocab_size, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError(f"bad header {header!r}") from None
        words, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(" ")
            if not line.strip():
                continue
            if len(parts) != dim + 1:
                raise DimMismatch(f"line {lineno}: expected {dim} values, got {len(parts) - 1}")
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError:
                raise FormatError(f"line {lineno}: non-numeric vector value") from None
            words.append(parts[0])
    if len(words) != vocab_size:
        raise FormatError(f"header declares {vocab_size} words, file has {len(words)}")
    if not words:
        raise FormatError("embedding file has no vectors")
    matrix = np.array(rows, dtype=float)
    return EmbeddingTable(words, matrix, matrix.mean(axis=0))


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.words)} {table.dim}\n")
        for w, row in zip(table.words, table.matrix):
            fh.write(w + " " + " ".join(repr(float(x)) for x in row) + "\n")
