import json
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medhighlight import corpus
from medhighlight.corpus import Token, make_message, preprocess, reconstruct, tokenize
from medhighlight.errors import (
    EmptyLexicon,
    LabelLengthError,
    LengthMismatch,
    ParseError,
    SchemaError,
    SpanMismatch,
)

# text that mixes ASCII, punctuation, digits, whitespace, URLs and a few multi-byte characters
_alphabet = st.sampled_from(list("abcXYZ019 .,'-!?:/\n\t\r") + ["é", "ß", "中", "😀", "\x00", " ", "ǅ"])
chat_text = st.one_of(
    st.text(),
    st.lists(st.one_of(_alphabet, st.sampled_from(["http://x.co/a", "www.a.b", " 38.5 ", "don't"]))).map("".join),
)


def test_preprocess_examples():
    assert preprocess("Visit https://x.co NOW") == "visit  now"
    assert preprocess("") == ""
    assert preprocess("Fever 38.5\nand chills") == "fever 38.5 and chills"
    assert preprocess("a\r\nb") == "a b"


def test_tokenize_examples():
    toks = tokenize("stomach pain, headache")
    assert [t.surface for t in toks] == ["stomach", "pain", ",", "headache"]
    assert [t.span for t in toks] == [(0, 7), (8, 12), (12, 13), (14, 22)]
    assert tokenize("") == []
    assert [t.surface for t in tokenize("38.5")] == ["38.5"]
    assert [t.surface for t in tokenize("don't")] == ["don't"]


def test_spans_are_utf8_byte_offsets():
    toks = tokenize("café ok")
    assert toks[0].span == (0, 5)
    assert toks[1].span == (6, 8)


@settings(max_examples=300, deadline=None)
@given(chat_text)
def test_round_trip(raw):
    text = preprocess(raw)
    assert reconstruct(tokenize(text), text) == text


@settings(max_examples=300, deadline=None)
@given(chat_text)
def test_preprocess_idempotent(raw):
    once = preprocess(raw)
    assert preprocess(once) == once


@settings(max_examples=300, deadline=None)
@given(chat_text.filter(lambda s: all(len(c.lower().encode()) <= len(c.encode()) for c in s)))
def test_preprocess_never_grows(raw):
    # lowercasing a handful of code points grows their UTF-8 encoding; those are filtered out above
    n_urls = len(corpus._URL.findall(raw.lower()))
    assert len(preprocess(raw).encode()) <= len(raw.encode()) + n_urls


@settings(max_examples=200, deadline=None)
@given(chat_text)
def test_tokens_are_nonempty_ordered_and_whitespace_free(raw):
    text = preprocess(raw)
    prev_end = 0
    for tok in tokenize(text):
        assert tok.start >= prev_end and tok.end > tok.start
        assert not any(c.isspace() for c in tok.surface)
        prev_end = tok.end


def test_corrupted_span_raises():
    toks = tokenize("stomach pain")
    bad = [toks[0], Token("pain", "pain", 7, 11)]
    with pytest.raises(SpanMismatch):
        reconstruct(bad, "stomach pain")
    with pytest.raises(SpanMismatch):
        reconstruct([Token("é", "é", 1, 2)], "é")


def test_label_length_checked():
    with pytest.raises(LabelLengthError):
        make_message("patient", "stomach pain", [1])


def test_merge_examples():
    assert corpus.merge_annotations([[1, 0, 1], [1, 0, 0], [1, 1, 1]]) == [1, 0, 1]
    assert corpus.merge_annotations([[0, 1, 1]] * 3) == [0, 1, 1]
    with pytest.raises(LengthMismatch):
        corpus.merge_annotations([[1, 0], [1]])


def test_merge_matches_vote_counter():
    rng = random.Random(3)
    for _ in range(50):
        n = rng.randint(1, 40)
        rows = [[rng.randint(0, 1) for _ in range(n)] for _ in range(3)]
        expected = []
        for j in range(n):
            ones = sum(r[j] for r in rows)
            expected.append(1 if ones >= 2 else 0)
        assert corpus.merge_annotations(rows) == expected


def _write_jsonl(path, records):
    path.write_text("\n".join(r if isinstance(r, str) else json.dumps(r) for r in records) + "\n")


def test_load_dataset_round_trip(tmp_path, fixture_conversation):
    path = tmp_path / "d.jsonl"
    corpus.save_dataset([fixture_conversation], path)
    (loaded,) = corpus.load_dataset(path, "highlighting")
    assert loaded == fixture_conversation


def test_load_dataset_errors(tmp_path):
    ok = {"id": "a", "issue_category": "skin", "messages": [{"role": "patient", "text": "a rash", "gold": [0, 1]}]}
    path = tmp_path / "d.jsonl"

    _write_jsonl(path, [ok, "{not json"])
    with pytest.raises(ParseError, match="line 2"):
        corpus.load_dataset(path)

    _write_jsonl(path, [{"id": "a"}])
    with pytest.raises(SchemaError, match="line 1"):
        corpus.load_dataset(path)

    _write_jsonl(path, [{**ok, "messages": [{"role": "patient", "text": "a rash", "gold": [1]}]}])
    with pytest.raises(LabelLengthError):
        corpus.load_dataset(path)

    _write_jsonl(path, [{**ok, "messages": [{"role": "patient", "text": "a rash"}]}])
    with pytest.raises(SchemaError, match="gold"):
        corpus.load_dataset(path, "highlighting")
    assert len(corpus.load_dataset(path, "classification")) == 1

    _write_jsonl(path, [{**ok, "issue_category": None}])
    with pytest.raises(SchemaError, match="issue_category"):
        corpus.load_dataset(path, "classification")

    _write_jsonl(path, [{**ok, "messages": [{"role": "doctor", "text": "hello", "gold": None}]}])
    with pytest.raises(SchemaError, match="patient"):
        corpus.load_dataset(path)


def test_term_lexicon(tmp_path):
    med = tmp_path / "med.txt"
    non = tmp_path / "non.txt"
    med.write_text("Abdominal Pain\nfever\n\nfever\n")
    non.write_text("table\nFEVER\nwindow\n")
    lex = corpus.load_term_lexicon(med, non)
    assert lex.medical_terms == {"abdominal pain", "fever"}
    assert lex.non_medical_terms == {"table", "window"}
    pairs = dict((" ".join(t), y) for t, y in lex.training_pairs())
    assert pairs["abdominal pain"] == [1, 1]
    assert pairs["table"] == [0]

    non.write_text("fever\n")
    with pytest.raises(EmptyLexicon):
        corpus.load_term_lexicon(med, non)


def test_annotation_set_missing_values():
    ann = corpus.AnnotationSet.from_rows([[1, None, 0], [1, 1, 0]])
    assert ann.unit_count == 3
    assert np.isnan(ann.labels[0, 1])
