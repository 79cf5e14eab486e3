"""N-gram TF-IDF scoring with conversations as documents.

score(t, d) = count(t in d) * ln(doc_count / df(t)), for n-grams n = 1..3.
Word highlight scores are the maximum L2-normalized score over every n-gram
covering the word.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Conversation, Message
from .errors import EmptyCorpus

Ngram = tuple[str, ...]


def ngrams(tokens: Sequence[str], ngram_range: tuple[int, int] = (1, 3)) -> list[Ngram]:
    lo, hi = ngram_range
    out = []
    for n in range(lo, hi + 1):
        out.extend(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return out


@dataclass(frozen=True)
class TfidfModel:
    doc_count: int
    df: dict[Ngram, int]
    ngram_range: tuple[int, int] = (1, 3)

    def idf(self, t: Ngram) -> float:
        f = self.df.get(t)
        if not f:
            return 0.0
        return math.log(self.doc_count / f)

    def to_json(self) -> str:
        return json.dumps(
            {
                "doc_count": self.doc_count,
                "ngram_range": list(self.ngram_range),
                "df": {" ".join(t): c for t, c in sorted(self.df.items())},
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TfidfModel":
        obj = json.loads(text)
        df = {tuple(k.split(" ")): int(v) for k, v in obj["df"].items()}
        return cls(int(obj["doc_count"]), df, tuple(obj["ngram_range"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TfidfModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def fit_documents(documents: Iterable[Sequence[str]], ngram_range=(1, 3)) -> TfidfModel:
    df: Counter = Counter()
    n_docs = 0
    for doc in documents:
        n_docs += 1
        df.update(set(ngrams(doc, ngram_range)))
    if n_docs == 0:
        raise EmptyCorpus("cannot fit TF-IDF on zero documents")
    return TfidfModel(n_docs, dict(df), tuple(ngram_range))


def fit(conversations: Sequence[Conversation], ngram_range=(1, 3)) -> TfidfModel:
    return fit_documents((c.norms() for c in conversations), ngram_range)


def score_ngram(model: TfidfModel, t: Sequence[str], d: Sequence[str]) -> float:
    t = tuple(t)
    n = len(t)
    count = sum(1 for i in range(len(d) - n + 1) if tuple(d[i:i + n]) == t)
    if count == 0:
        return 0.0
    return count * model.idf(t)


def document_vector(model: TfidfModel, d: Sequence[str]) -> dict[Ngram, float]:
    counts = Counter(ngrams(d, model.ngram_range))
    raw = {t: c * model.idf(t) for t, c in counts.items()}
    norm = math.sqrt(sum(v * v for v in raw.values()))
    if norm == 0.0:
        return {t: 0.0 for t in raw}
    return {t: v / norm for t, v in raw.items()}


def token_scores(model: TfidfModel, d: Sequence[str]) -> np.ndarray:
    vec = document_vector(model, d)
    scores = np.zeros(len(d))
    lo, hi = model.ngram_range
    for n in range(lo, hi + 1):
        for i in range(len(d) - n + 1):
            v = vec[tuple(d[i:i + n])]
            if v > 0.0:
                np.maximum(scores[i:i + n], v, out=scores[i:i + n])
    return scores


def highlight_scores(model: TfidfModel, message: Message) -> np.ndarray:
    return token_scores(model, message.norms)
