"""Chat data model: preprocessing, span-preserving tokenization, dataset I/O.

Token spans are UTF-8 byte offsets into the *preprocessed* message text, so
highlights predicted on tokens can always be mapped back onto the text.
"""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyLexicon,
    LabelLengthError,
    LengthMismatch,
    ParseError,
    SchemaError,
    SpanMismatch,
)

log = logging.getLogger(__name__)

ROLES = ("patient", "doctor")
ISSUE_CATEGORIES = (
    "cold_or_flu",
    "covid19",
    "gastrointestinal",
    "pregnancy",
    "sexual_health",
    "skin",
)

_LINE_BREAK = re.compile(r"\r\n|[\n\r\t\x0b\x0c\x85\u2028\u2029]")
_URL = re.compile(r"(?:https?://|www\.)\S*")
_TOKEN = re.compile(r"\w+(?:[.'\-]\w+)*|[^\w\s]")
# control, surrogate, unassigned
_DROP_CATEGORIES = {"Cc", "Cs", "Cn"}


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    start: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class Message:
    role: str
    raw_text: str
    text: str
    tokens: tuple[Token, ...]
    gold: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise SchemaError(f"unknown role {self.role!r}")
        if self.gold is not None and len(self.gold) != len(self.tokens):
            raise LabelLengthError(
                f"gold has {len(self.gold)} labels for {len(self.tokens)} tokens"
            )

    @property
    def norms(self) -> list[str]:
        return [t.norm for t in self.tokens]


@dataclass(frozen=True)
class Conversation:
    id: str
    messages: tuple[Message, ...]
    issue_category: str | None = None

    def __post_init__(self):
        if self.messages and self.messages[0].role != "patient":
            raise SchemaError(f"conversation {self.id!r} does not start with a patient message")
        if self.issue_category is not None and self.issue_category not in ISSUE_CATEGORIES:
            raise SchemaError(f"unknown issue category {self.issue_category!r}")

    @property
    def patient_messages(self) -> list[Message]:
        return [m for m in self.messages if m.role == "patient"]

    def norms(self) -> list[str]:
        """All messages' normalized tokens, concatenated in order."""
        return [t.norm for m in self.messages for t in m.tokens]


@dataclass
class AnnotationSet:
    """Annotators x units matrix of 0/1 labels, ``nan`` where missing."""

    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=float)
        if self.labels.ndim != 2:
            raise ValueError("annotation matrix must be 2-D (annotators x units)")

    @property
    def unit_count(self) -> int:
        return self.labels.shape[1]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int | None]]) -> "AnnotationSet":
        return cls(np.array([[np.nan if v is None else v for v in r] for r in rows], dtype=float))


@dataclass(frozen=True)
class TermLexicon:
    medical_terms: frozenset[str]
    non_medical_terms: frozenset[str]

    def training_pairs(self) -> list[tuple[list[str], list[int]]]:
        """One (tokens, labels) sequence per term; medical tokens are 1, others 0."""
        pairs = [(term.split(" "), [1] * len(term.split(" "))) for term in sorted(self.medical_terms)]
        pairs += [(term.split(" "), [0] * len(term.split(" "))) for term in sorted(self.non_medical_terms)]
        return pairs


def preprocess(raw: str) -> str:
    """Lowercase, flatten line breaks to spaces, drop control/non-Unicode chars, strip URLs."""
    text = raw.lower()
    text = _LINE_BREAK.sub(" ", text)
    text = "".join(ch for ch in text if unicodedata.category(ch) not in _DROP_CATEGORIES)
    return _URL.sub("", text)


def _byte_offsets(text: str) -> list[int] | None:
    if text.isascii():
        return None
    offsets = [0]
    for ch in text:
        offsets.append(offsets[-1] + len(ch.encode("utf-8")))
    return offsets


def tokenize(text: str) -> list[Token]:
    offsets = _byte_offsets(text)
    tokens = []
    for m in _TOKEN.finditer(text):
        start, end = m.span()
        if offsets is not None:
            start, end = offsets[start], offsets[end]
        surface = m.group()
        tokens.append(Token(surface, surface.lower(), start, end))
    return tokens


def reconstruct(tokens: Sequence[Token], original: str) -> str:
    """Rebuild ``original`` from token surfaces plus the gaps between their spans."""
    data = original.encode("utf-8")
    pieces = []
    pos = 0
    for tok in tokens:
        if tok.start < pos or tok.end < tok.start or tok.end > len(data):
            raise SpanMismatch(f"span {tok.span} out of order or out of range")
        try:
            sliced = data[tok.start:tok.end].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SpanMismatch(f"span {tok.span} splits a character") from exc
        if sliced != tok.surface:
            raise SpanMismatch(f"span {tok.span} slices {sliced!r}, expected {tok.surface!r}")
        pieces.append(data[pos:tok.start])
        pieces.append(tok.surface.encode("utf-8"))
        pos = tok.end
    pieces.append(data[pos:])
    return b"".join(pieces).decode("utf-8")


def make_message(role: str, raw_text: str, gold: Sequence[int] | None = None) -> Message:
    text = preprocess(raw_text)
    tokens = tuple(tokenize(text))
    return Message(role, raw_text, text, tokens, None if gold is None else tuple(int(g) for g in gold))


def _conversation_from_record(record: dict, kind: str, line: int) -> Conversation:
    for key in ("id", "messages"):
        if key not in record:
            raise SchemaError(f"missing field {key!r}", line)
    if not isinstance(record["messages"], list) or not record["messages"]:
        raise SchemaError("messages must be a non-empty list", line)
    messages = []
    for i, m in enumerate(record["messages"]):
        if not isinstance(m, dict) or "role" not in m or "text" not in m:
            raise SchemaError(f"message {i} needs 'role' and 'text'", line)
        gold = m.get("gold")
        if gold is not None and any(g not in (0, 1) for g in gold):
            raise SchemaError(f"message {i}: gold labels must be 0 or 1", line)
        if kind == "highlighting" and m["role"] == "patient" and gold is None:
            raise SchemaError(f"message {i}: patient message has no gold labels", line)
        try:
            messages.append(make_message(m["role"], m["text"], gold))
        except ParseError as exc:
            raise type(exc)(f"message {i}: {exc}", line) from None
    category = record.get("issue_category")
    if kind == "classification" and category is None:
        raise SchemaError("classification data needs an issue_category", line)
    try:
        return Conversation(str(record["id"]), tuple(messages), category)
    except SchemaError as exc:
        raise SchemaError(str(exc), line) from None


def load_dataset(path: str | Path, kind: str = "highlighting") -> list[Conversation]:
    if kind not in ("highlighting", "classification"):
        raise ValueError(f"unknown dataset kind {kind!r}")
    conversations = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON ({exc.msg})", lineno) from None
            if not isinstance(record, dict):
                raise ParseError("expected a JSON object", lineno)
            conversations.append(_conversation_from_record(record, kind, lineno))
    return conversations


def conversation_to_record(conv: Conversation) -> dict:
    return {
        "id": conv.id,
        "issue_category": conv.issue_category,
        "messages": [
            {"role": m.role, "text": m.raw_text, "gold": None if m.gold is None else list(m.gold)}
            for m in conv.messages
        ],
    }


def save_dataset(conversations: Iterable[Conversation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for conv in conversations:
            fh.write(json.dumps(conversation_to_record(conv)) + "\n")


def merge_annotations(per_annotator: Sequence[Sequence[int]]) -> list[int]:
    """Per-token strict majority vote across annotators (2-of-3 for three)."""
    if not per_annotator:
        raise LengthMismatch("no annotations to merge")
    n = len(per_annotator[0])
    if any(len(labels) != n for labels in per_annotator):
        raise LengthMismatch("annotators labeled different numbers of tokens")
    votes = np.asarray(per_annotator, dtype=int).sum(axis=0)
    return [int(v) for v in (2 * votes > len(per_annotator))]


def normalize_term(term: str) -> str:
    return " ".join(t.norm for t in tokenize(preprocess(term)))


def _read_terms(paths: Iterable[str | Path]) -> set[str]:
    terms = set()
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                term = normalize_term(line)
                if term:
                    terms.add(term)
    return terms


def load_term_lexicon(medical_paths, non_medical_paths) -> TermLexicon:
    if isinstance(medical_paths, (str, Path)):
        medical_paths = [medical_paths]
    if isinstance(non_medical_paths, (str, Path)):
        non_medical_paths = [non_medical_paths]
    medical = _read_terms(medical_paths)
    non_medical = _read_terms(non_medical_paths)
    conflicts = medical & non_medical
    if conflicts:
        log.info("%d lexicon terms listed as both medical and non-medical; keeping them medical", len(conflicts))
    non_medical -= medical
    if not medical or not non_medical:
        raise EmptyLexicon("both medical and non-medical term lists must be non-empty")
    return TermLexicon(frozenset(medical), frozenset(non_medical))
