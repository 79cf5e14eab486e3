"""Seeded generator for a synthetic patient-doctor chat benchmark.

Gold highlights follow annotation-guideline style rules: medical terms, body
parts, patient gender, numbers, a time unit right after a number, and a
laterality word right before a body part. Several highlight words are
ambiguous out of context ("of", "left", "days", ...), so a tagger that sees
the whole message can beat one that sees a single word.

The lexicon leaves out some medical terms and everything that is not a
medical term (numbers, gender), so a lexicon-only tagger is clearly
incomplete until it is fine-tuned on annotated chats.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ISSUE_CATEGORIES, Conversation, TermLexicon, make_message, save_dataset, tokenize
from .embeddings import EmbeddingTable, save_embeddings

CATEGORY_TERMS = {
    "cold_or_flu": ["fever", "runny nose", "sore throat", "chills", "body aches", "congestion",
                    "sneezing", "stuffy nose"],
    "covid19": ["dry cough", "loss of smell", "shortness of breath", "covid test", "loss of taste",
                "fatigue", "positive test", "tightness in chest"],
    "gastrointestinal": ["diarrhea", "nausea", "vomiting", "abdominal pain", "bloating", "constipation",
                         "heartburn", "acid reflux"],
    "pregnancy": ["missed period", "morning sickness", "pregnancy test", "spotting", "cramping",
                  "prenatal vitamins", "ultrasound", "contractions"],
    "sexual_health": ["discharge", "burning urination", "std test", "itching", "genital sores",
                      "contraception", "birth control", "yeast infection"],
    "skin": ["rash", "hives", "eczema", "acne", "red bumps", "itchy skin", "blisters", "psoriasis"],
}
# the last HELD_OUT terms of each category never appear in the lexicon
HELD_OUT = 2
SHARED_TERMS = ["pain", "swelling", "headache", "dizziness", "temperature", "bleeding", "ibuprofen",
                "antibiotics", "tylenol", "prescription"]
BODY_PARTS = ["arm", "leg", "chest", "stomach", "back", "throat", "head", "knee", "shoulder", "foot",
              "neck", "eye", "ear", "wrist"]
LATERAL = ["left", "right", "lower", "upper"]
GENDER = ["male", "female", "man", "woman"]
TIME_UNITS = ["days", "weeks", "hours", "months"]
STOPWORDS = ["i", "have", "a", "the", "and", "my", "it", "been", "for", "since", "with", "is", "to", "of",
             "am", "was", "that", "this", "in", "on", "me", "do", "you", "what", "should", "can", "be",
             "not", "but", "so", "or", "at", "about", "any", "some", "very", "had", "there", "are", "if",
             "your", "take", "get", "see", "how", "long", "when", "also", "just", "it's", "i'm"]
FILLER = ["really", "worried", "please", "help", "hi", "hello", "thanks", "thank", "bad", "today",
          "yesterday", "work", "home", "sleep", "night", "morning", "feel", "feeling", "think", "know",
          "going", "started", "weekend", "family", "kids", "job", "house", "car", "phone", "coffee",
          "water", "food", "dinner", "lunch", "walk", "gym", "trip", "office", "school", "friend",
          "mother", "father", "husband", "sister", "brother", "weather", "store", "meeting", "week",
          "month", "year", "time", "little", "bit", "much", "more", "less", "better", "worse", "again",
          "still", "already", "now", "then", "where", "why", "maybe", "probably", "sure", "okay", "yes",
          "no", "good", "great", "fine", "busy", "happy", "late", "early", "new", "old", "big", "small",
          "hard", "easy", "quick", "slow", "hot", "warm", "nice", "weird", "strange", "normal", "usual",
          "same", "other", "first", "last", "next", "few", "lot", "things", "something", "anything",
          "nothing", "tonight", "tomorrow", "ago", "recently", "lately", "usually", "sometimes", "often",
          "never", "always", "worked", "went", "came", "made", "said", "told", "asked", "wanted", "tried",
          "looked", "garden", "dog", "cat", "movie", "book", "music", "party", "holiday", "shopping",
          "cooking", "driving", "reading", "running", "travel", "visit", "hurts", "started", "year", "old",
          "floor", "price", "dose", "sounds", "correct", "seems", "hurt", "noticed", "worried", "getting"]
DOCTOR_PHRASES = [
    "how long have you had the {t} ?",
    "thanks for the details . any other symptoms ?",
    "please take {n} mg of {drug} twice a day .",
    "i would recommend rest and fluids .",
    "if it gets worse please go to a walk-in clinic .",
    "is there anything else you would like to ask ?",
    "have you tried {drug} for the {t} ?",
]
DRUGS = ["ibuprofen", "tylenol", "antibiotics"]

WORD_TYPES = ("medical", "body", "lateral", "gender", "number", "time", "stop", "filler")


@dataclass
class Benchmark:
    train: list[Conversation]
    test: list[Conversation]
    lexicon: TermLexicon
    embeddings: EmbeddingTable
    medical_terms: list[str]
    non_medical_terms: list[str]

    def write(self, root: str | Path) -> None:
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        save_dataset(self.train, root / "highlight_train.jsonl")
        save_dataset(self.test, root / "highlight_test.jsonl")
        save_dataset(self.train, root / "classification.jsonl")
        (root / "medical_terms.txt").write_text("\n".join(self.medical_terms) + "\n", encoding="utf-8")
        (root / "non_medical_terms.txt").write_text("\n".join(self.non_medical_terms) + "\n", encoding="utf-8")
        save_embeddings(self.embeddings, root / "embeddings.txt")


def _numbers() -> list[str]:
    ints = [str(i) for i in range(1, 100)]
    temps = [f"{t / 10:.1f}" for t in range(365, 406)]
    return ints + temps


def _word_types() -> dict[str, str]:
    types: dict[str, str] = {}
    for w in FILLER:
        types[w] = "filler"
    for w in STOPWORDS:
        types[w] = "stop"
    for w in TIME_UNITS:
        types[w] = "time"
    for w in LATERAL:
        types[w] = "lateral"
    for w in GENDER:
        types[w] = "gender"
    for w in _numbers():
        types[w] = "number"
    for w in BODY_PARTS:
        types[w] = "body"
    for terms in list(CATEGORY_TERMS.values()) + [SHARED_TERMS]:
        for term in terms:
            for w in term.split():
                if types.get(w) != "stop":
                    types[w] = "medical"
    for w in ("mg", "walk-in", "clinic", "symptoms", "recommend", "rest", "fluids", "details", "twice",
              "day", "would", "like", "ask", "anything", "else", "other", "tried", "gets", "go", "year",
              "old", "few", "feels", "hurts", "took", ",", ".", "?", "!"):
        types.setdefault(w, "filler")
    return types


def make_embeddings(dim: int = 16, seed: int = 0, noise: float = 1.0) -> EmbeddingTable:
    """Random vectors clustered by word type, standing in for pretrained domain embeddings."""
    rng = np.random.default_rng(seed)
    types = _word_types()
    directions = {t: rng.normal(size=dim) for t in WORD_TYPES}
    words = sorted(types)
    matrix = np.array([directions[types[w]] + noise * rng.normal(size=dim) for w in words])
    return EmbeddingTable(words, matrix, matrix.mean(axis=0))


class _ChatWriter:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.numbers = [str(i) for i in range(1, 15)]
        self.temps = _numbers()[99:]
        # Zipf-like filler usage: a few common words, a long tail of rare ones
        ranks = np.arange(1, len(FILLER) + 1)
        self.filler_p = (1.0 / ranks) / np.sum(1.0 / ranks)
        self.filler = list(rng.permutation(FILLER))

    def pick(self, seq):
        return seq[self.rng.integers(len(seq))]

    def fill(self, k):
        return [(self.filler[j], 0) for j in self.rng.choice(len(self.filler), size=k, p=self.filler_p)]

    def term(self, category):
        if self.rng.random() < 0.15:
            category = self.pick(ISSUE_CATEGORIES)
        pool = CATEGORY_TERMS[category] + SHARED_TERMS[:3]
        return [(w, 1) for w in self.pick(pool).split()]

    def intake(self, category, age):
        t1, t2 = self.term(category), self.term(category)
        n = self.pick(self.numbers)
        return ([("i", 0), ("am", 0), ("a", 0), (age, 1), ("year", 0), ("old", 0), (self.pick(GENDER), 1),
                 (".", 0), ("i", 0), ("have", 0)] + t1 + [("and", 0)] + t2
                + [("for", 0), (n, 1), (self.pick(TIME_UNITS), 1), (".", 0)])

    def patient_message(self, category):
        kind = self.rng.integers(9)
        r = self.rng
        if kind == 0:
            return ([("i", 0), ("have", 0), ("had", 0)] + self.term(category)
                    + [("since", 0), (self.pick(self.numbers), 1), (self.pick(TIME_UNITS), 1), ("ago", 0)]
                    + self.fill(r.integers(0, 3)))
        if kind == 1:
            return ([("my", 0), (self.pick(LATERAL), 1), (self.pick(BODY_PARTS), 1), ("hurts", 0)]
                    + self.fill(r.integers(1, 4)) + [(".", 0)])
        if kind == 2:
            # laterality word used in its everyday sense
            return self.pick([
                [("i", 0), ("left", 0), ("work", 0), ("early", 0)],
                [("is", 0), ("that", 0), ("right", 0), ("?", 0)],
                [("that", 0), ("sounds", 0), ("right", 0)],
                [("the", 0), ("upper", 0), ("floor", 0)],
                [("a", 0), ("lower", 0), ("price", 0)],
            ]) + self.fill(r.integers(1, 4))
        if kind == 3:
            return ([("it", 0), ("started", 0), ("a", 0), ("few", 0), (self.pick(TIME_UNITS), 0), ("ago", 0),
                     ("and", 0), ("the", 0)] + self.term(category) + [("is", 0)] + self.fill(r.integers(1, 3)))
        if kind == 4:
            return ([("my", 0), ("temperature", 1), ("was", 0), (self.pick(self.temps), 1), ("this", 0)]
                    + self.fill(1) + [(".", 0)])
        if kind == 5:
            # "of" outside a medical term
            return [("a", 0), ("lot", 0), ("of", 0)] + self.fill(r.integers(1, 3)) + self.fill(r.integers(1, 3))
        if kind == 6:
            return ([("the", 0)] + self.term(category) + [("in", 0), ("my", 0), (self.pick(BODY_PARTS), 1),
                                                         ("is", 0)] + self.fill(r.integers(1, 3)))
        if kind == 7:
            return self.fill(r.integers(3, 8)) + [(".", 0)]
        return ([("i", 0), ("took", 0), (self.pick(self.numbers), 1), (self.pick(DRUGS), 1)]
                + self.fill(r.integers(1, 3)))

    def doctor_message(self, category):
        text = self.pick(DOCTOR_PHRASES)
        return text.format(t=" ".join(w for w, _ in self.term(category)), n=self.pick(["200", "400", "500"]),
                           drug=self.pick(DRUGS))


def _message_from_pieces(pieces, rng=None, label_noise=0.0):
    words = [w for w, _ in pieces]
    text = ""
    for w in words:
        text += w if (not text or w in ",.?!") else " " + w
    # labels must line up one-to-one with our tokenizer
    assert [t.surface for t in tokenize(text)] == words, (words, text)
    labels = [lab for _, lab in pieces]
    if rng is not None and label_noise > 0:
        # inconsistent annotators
        labels = [1 - lab if rng.random() < label_noise else lab for lab in labels]
    return make_message("patient", text, labels)


def make_conversation(cid: str, category: str, writer: _ChatWriter, label_noise: float = 0.0) -> Conversation:
    rng = writer.rng
    age = str(rng.integers(18, 80))
    messages = [_message_from_pieces(writer.intake(category, age), rng, label_noise)]
    for _ in range(rng.integers(2, 5)):
        if rng.random() < 0.6:
            messages.append(make_message("doctor", writer.doctor_message(category)))
        messages.append(_message_from_pieces(writer.patient_message(category), rng, label_noise))
    messages.append(make_message("doctor", writer.doctor_message(category)))
    return Conversation(cid, tuple(messages), category)


def lexicon_terms() -> tuple[list[str], list[str]]:
    medical = sorted({t for terms in CATEGORY_TERMS.values() for t in terms[:-HELD_OUT]}
                     | set(SHARED_TERMS) | set(BODY_PARTS))
    non_medical = sorted((set(FILLER) | set(STOPWORDS) | set(LATERAL) | set(TIME_UNITS)) - set(medical))
    return medical, non_medical


def generate_benchmark(seed: int = 0, n_train: int = 300, n_test: int = 50, dim: int = 16,
                       label_noise: float = 0.03, embedding_noise: float = 1.0) -> Benchmark:
    rng = np.random.default_rng(seed)
    writer = _ChatWriter(rng)
    chats = []
    for k in range(n_train + n_test):
        category = ISSUE_CATEGORIES[rng.integers(len(ISSUE_CATEGORIES))]
        # held-out chats are majority-merged over three annotators, so keep them clean
        noise = label_noise if k < n_train else 0.0
        chats.append(make_conversation(f"chat-{seed}-{k:04d}", category, writer, noise))
    medical, non_medical = lexicon_terms()
    lexicon = TermLexicon(frozenset(medical), frozenset(non_medical))
    return Benchmark(chats[:n_train], chats[n_train:], lexicon, make_embeddings(dim, seed, embedding_noise), medical, non_medical)
