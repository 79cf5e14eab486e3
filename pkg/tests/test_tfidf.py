import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medhighlight import tfidf
from medhighlight.corpus import Conversation, make_message
from medhighlight.errors import EmptyCorpus

import oracles

VOCAB = list("abcdefg")


def random_corpus(rng, max_docs=10, max_len=20):
    return [[rng.choice(VOCAB) for _ in range(rng.randint(1, max_len))] for _ in range(rng.randint(1, max_docs))]


def test_hand_counts():
    model = tfidf.fit_documents([["fever", "cough"], ["fever", "rash"]])
    assert model.doc_count == 2
    assert model.df[("fever",)] == 2
    assert model.df[("cough",)] == 1
    assert model.df[("fever", "cough")] == 1
    assert model.df[("fever", "rash")] == 1
    assert tfidf.score_ngram(model, ["cough"], ["fever", "cough"]) == pytest.approx(math.log(2))
    assert tfidf.score_ngram(model, ["fever"], ["fever", "cough"]) == 0.0
    assert tfidf.score_ngram(model, ["nausea"], ["nausea"]) == 0.0


def test_single_document_df_is_one():
    model = tfidf.fit_documents([["a", "b", "a"]])
    assert set(model.df.values()) == {1}


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        tfidf.fit([])


def test_unseen_single_token_scores_zero():
    model = tfidf.fit_documents([["a"], ["b"]])
    assert tfidf.token_scores(model, ["zzz"]).tolist() == [0.0]


def test_all_stopword_message():
    model = tfidf.fit_documents([["the", "a", "x"], ["the", "a", "y"]])
    assert tfidf.token_scores(model, ["the", "a"]).tolist() == [0.0, 0.0]


def test_fit_uses_whole_conversations():
    conv = Conversation("c", (make_message("patient", "fever"), make_message("doctor", "cough")))
    model = tfidf.fit([conv])
    assert ("fever", "cough") in model.df


def test_against_brute_force():
    rng = random.Random(7)
    for _ in range(50):
        docs = random_corpus(rng)
        model = tfidf.fit_documents(docs)
        for t in oracles.all_ngrams([w for d in docs for w in d]):
            assert model.df.get(t, 0) == oracles.tfidf_df(docs, t)
        for d in docs + random_corpus(rng, 2):
            for t in oracles.all_ngrams(d):
                assert abs(tfidf.score_ngram(model, t, d) - oracles.tfidf_score(docs, t, d)) <= 1e-12
            np.testing.assert_allclose(tfidf.token_scores(model, d), oracles.tfidf_word_scores(docs, d),
                                       rtol=0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.sampled_from(VOCAB), min_size=1, max_size=12), min_size=1, max_size=8),
       st.lists(st.sampled_from(VOCAB), min_size=1, max_size=12))
def test_vector_norm_and_score_range(docs, d):
    model = tfidf.fit_documents(docs)
    vec = tfidf.document_vector(model, d)
    norm = math.sqrt(sum(v * v for v in vec.values()))
    assert norm == 0.0 or abs(norm - 1.0) <= 1e-9
    scores = tfidf.token_scores(model, d)
    assert np.all(scores >= 0.0) and np.all(scores <= 1.0 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.sampled_from(VOCAB), min_size=1, max_size=10), min_size=1, max_size=8),
       st.lists(st.sampled_from(VOCAB[:3]), min_size=1, max_size=3))
def test_idf_monotone_when_adding_documents_without_t(docs, t):
    before = tfidf.fit_documents(docs).idf(tuple(t))
    extra = ["zz"]
    after = tfidf.fit_documents(docs + [extra]).idf(tuple(t))
    if before > 0 or tuple(t) in tfidf.fit_documents(docs).df:
        assert after >= before


def test_json_round_trip(tmp_path):
    model = tfidf.fit_documents([["fever", "cough"], ["fever", "rash", "rash"]])
    model.save(tmp_path / "m.json")
    assert tfidf.TfidfModel.load(tmp_path / "m.json") == model
