"""Train the five highlighters and score them on a test set."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import classify, tfidf
from . import lime as lm
from . import tagger as tg
from .corpus import Conversation, Message, TermLexicon
from .embeddings import EmbeddingTable
from .evaluation import MetricsReport, evaluate_model

log = logging.getLogger(__name__)

MODEL_NAMES = ("tfidf", "svm+lime", "lr+lime", "unigram-tagger", "ngram-tagger")
DEFAULT_THRESHOLDS = {"tfidf": 0.01, "lime": 0.005, "tagger": 0.5}


@dataclass
class Settings:
    seed: int = 0
    tfidf_threshold: float = DEFAULT_THRESHOLDS["tfidf"]
    lime_threshold: float = DEFAULT_THRESHOLDS["lime"]
    tagger_threshold: float = DEFAULT_THRESHOLDS["tagger"]
    classifier: classify.TrainHyper = field(default_factory=classify.TrainHyper)
    lime: lm.LimeConfig = field(default_factory=lm.LimeConfig)
    tagger: tg.TaggerConfig = field(default_factory=tg.TaggerConfig)
    pretrain: tg.TrainHyper = field(default_factory=lambda: tg.TrainHyper(epochs=20))
    finetune: tg.TrainHyper = field(default_factory=tg.TrainHyper)

    def with_seed(self, seed: int) -> "Settings":
        """Copy with every component seed derived from ``seed``."""
        s = Settings(**{k: v for k, v in vars(self).items()})
        s.seed = seed
        s.classifier = classify.TrainHyper(**{**asdict(self.classifier), "seed": seed})
        s.lime = lm.LimeConfig(**{**asdict(self.lime), "seed": seed})
        s.pretrain = tg.TrainHyper(**{**asdict(self.pretrain), "seed": seed})
        s.finetune = tg.TrainHyper(**{**asdict(self.finetune), "seed": seed + 1})
        return s

    def tagger_config(self, mode: str) -> tg.TaggerConfig:
        return tg.TaggerConfig(**{**asdict(self.tagger), "mode": mode})

    def to_dict(self) -> dict:
        return asdict(self)


def benchmark_settings(seed: int = 0) -> Settings:
    """Desk-scale settings for the synthetic benchmark (16-dim vectors, a few hundred chats)."""
    return Settings(
        tagger=tg.TaggerConfig(cells_per_direction=32),
        pretrain=tg.TrainHyper(epochs=30, lr=1e-2),
        finetune=tg.TrainHyper(epochs=10, lr=1e-2),
        lime=lm.LimeConfig(n_samples=500),
    ).with_seed(seed)


class TfidfScorer:
    def __init__(self, model: tfidf.TfidfModel):
        self.model = model

    def __call__(self, messages: Sequence[Message]) -> list[np.ndarray]:
        return [tfidf.highlight_scores(self.model, m) for m in messages]


class LimeScorer:
    """Explains every message once for all classifiers and caches the per-model scores."""

    def __init__(self, models: Sequence[classify.LinearModel], space: classify.FeatureSpace,
                 config: lm.LimeConfig):
        self.models = list(models)
        self.space = space
        self.config = config
        self._cache: dict[tuple[str, ...], list[np.ndarray]] = {}

    def scores(self, message: Message) -> list[np.ndarray]:
        key = tuple(message.norms)
        if key not in self._cache:
            if not key:
                self._cache[key] = [np.zeros(0) for _ in self.models]
            else:
                explanations = lm.explain_with_classifiers(self.models, self.space, key, self.config)
                self._cache[key] = [lm.highlight_scores_from_explanation(e) for e in explanations]
        return self._cache[key]

    def for_model(self, k: int):
        return lambda messages: [self.scores(m)[k] for m in messages]


class TaggerScorer:
    def __init__(self, params: tg.TaggerParams, config: tg.TaggerConfig):
        self.params = params
        self.config = config

    def __call__(self, messages: Sequence[Message]) -> list[np.ndarray]:
        return tg.predict_messages(self.params, self.config, messages)


@dataclass
class TrainedModels:
    tfidf: tfidf.TfidfModel
    space: classify.FeatureSpace
    svm: classify.LinearModel
    lr: classify.LinearModel
    taggers: dict[str, tuple[tg.TaggerParams, tg.TaggerConfig]]
    pretrained: dict[str, tg.TaggerParams]


def train_all(train: Sequence[Conversation], classification: Sequence[Conversation], lexicon: TermLexicon,
              embeddings: EmbeddingTable, settings: Settings) -> TrainedModels:
    tf = tfidf.fit(train)
    # classifier features reuse the n-gram statistics of the classification corpus
    space = classify.build_feature_space(tfidf.fit(classification))
    svm = classify.train(space, classification, "hinge", settings.classifier)
    lr = classify.train(space, classification, "logistic", settings.classifier)
    taggers, pretrained = {}, {}
    for mode in ("unigram", "ngram"):
        config = settings.tagger_config(mode)
        base, _ = tg.pretrain(lexicon, embeddings, config, settings.pretrain)
        tuned, _ = tg.finetune(base, train, config, settings.finetune)
        pretrained[mode] = base
        taggers[mode] = (tuned, config)
    return TrainedModels(tf, space, svm, lr, taggers, pretrained)


def scorers(models: TrainedModels, settings: Settings) -> dict[str, tuple[object, float]]:
    lime_scorer = LimeScorer([models.svm, models.lr], models.space, settings.lime)
    return {
        "tfidf": (TfidfScorer(models.tfidf), settings.tfidf_threshold),
        "svm+lime": (lime_scorer.for_model(0), settings.lime_threshold),
        "lr+lime": (lime_scorer.for_model(1), settings.lime_threshold),
        "unigram-tagger": (TaggerScorer(*models.taggers["unigram"]), settings.tagger_threshold),
        "ngram-tagger": (TaggerScorer(*models.taggers["ngram"]), settings.tagger_threshold),
    }


def evaluate_all(models: TrainedModels, test: Sequence[Conversation], settings: Settings) -> list[MetricsReport]:
    reports = []
    for name, (scorer, threshold) in scorers(models, settings).items():
        reports.append(evaluate_model(scorer, test, threshold, name))
        log.info("%s: %s", name, reports[-1])
    return reports
