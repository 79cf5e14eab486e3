"""One-vs-rest linear issue-category classifiers over TF-IDF n-gram features.

Both heads (logistic and hinge) are trained by full-batch gradient descent on
an L2-regularized mean loss; the step size halves whenever a step would raise
the loss, so the loss trace never increases.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import tfidf
from .corpus import ISSUE_CATEGORIES, Conversation
from .errors import NonFiniteLoss, SingleClassError

log = logging.getLogger(__name__)

LOSS_KINDS = ("logistic", "hinge")


@dataclass(frozen=True)
class FeatureSpace:
    vocabulary: dict[tfidf.Ngram, int]
    tfidf: tfidf.TfidfModel

    @property
    def size(self) -> int:
        return len(self.vocabulary)

    def digest(self) -> str:
        h = hashlib.sha256()
        for t in sorted(self.vocabulary, key=self.vocabulary.__getitem__):
            h.update(" ".join(t).encode("utf-8") + b"\n")
        return h.hexdigest()[:16]


def build_feature_space(model: tfidf.TfidfModel) -> FeatureSpace:
    vocab = {t: i for i, t in enumerate(sorted(model.df))}
    return FeatureSpace(vocab, model)


def vectorize_tokens(space: FeatureSpace, tokens: Sequence[str]) -> dict[int, float]:
    vec = tfidf.document_vector(space.tfidf, tokens)
    return {space.vocabulary[t]: v for t, v in vec.items() if t in space.vocabulary and v != 0.0}


def feature_matrix(space: FeatureSpace, token_lists: Sequence[Sequence[str]]) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for tokens in token_lists:
        row = vectorize_tokens(space, tokens)
        cols = sorted(row)
        indices.extend(cols)
        data.extend(row[c] for c in cols)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(token_lists), space.size),
    )


def vectorize(space: FeatureSpace, conversation: Conversation) -> sp.csr_matrix:
    """Single-row feature matrix for a whole conversation."""
    return feature_matrix(space, [conversation.norms()])


@dataclass
class TrainHyper:
    l2: float = 1e-4
    epochs: int = 300
    lr: float = 0.5
    seed: int = 0


@dataclass
class LinearModel:
    weights: np.ndarray  # classes x V
    bias: np.ndarray
    loss_kind: str
    classes: list[str]
    vocabulary_hash: str = ""
    loss_trace: list[float] = field(default_factory=list)

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X @ self.weights.T) + self.bias

    def to_json(self) -> str:
        return json.dumps(
            {
                "classes": self.classes,
                "vocabulary_hash": self.vocabulary_hash,
                "loss_kind": self.loss_kind,
                "weights": self.weights.tolist(),
                "bias": self.bias.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        obj = json.loads(text)
        return cls(
            np.asarray(obj["weights"], dtype=float),
            np.asarray(obj["bias"], dtype=float),
            obj["loss_kind"],
            list(obj["classes"]),
            obj.get("vocabulary_hash", ""),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def head_loss_and_grad(X, signs: np.ndarray, w: np.ndarray, b: float, loss_kind: str, l2: float):
    """Mean one-vs-rest loss for a single class head, with its gradient.

    ``signs`` holds +1 for the head's class and -1 otherwise.
    """
    n = X.shape[0]
    z = np.asarray(X @ w).ravel() + b
    margin = signs * z
    if loss_kind == "logistic":
        loss = np.logaddexp(0.0, -margin).mean()
        # d/dz log(1 + e^{-s z}) = -s * sigmoid(-s z)
        r = -signs * np.exp(-np.logaddexp(0.0, margin)) / n
    elif loss_kind == "hinge":
        loss = np.maximum(0.0, 1.0 - margin).mean()
        r = -signs * (margin < 1.0) / n
    else:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    loss += 0.5 * l2 * float(w @ w)
    gw = np.asarray(X.T @ r).ravel() + l2 * w
    gb = float(r.sum())
    return float(loss), gw, gb


def fit_linear(X, y: Sequence[str], loss_kind: str, hyper: TrainHyper | None = None,
               classes: Sequence[str] | None = None) -> LinearModel:
    hyper = hyper or TrainHyper()
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    y = list(y)
    present = set(y)
    if classes is None:
        order = {c: i for i, c in enumerate(ISSUE_CATEGORIES)}
        classes = sorted(present, key=lambda c: (order.get(c, len(order)), c))
    classes = list(classes)
    if len(present) < 2:
        raise SingleClassError(f"need at least two classes, got {sorted(present)}")

    n_features = X.shape[1]
    rng = np.random.default_rng(hyper.seed)
    W = rng.normal(0.0, 0.01, size=(len(classes), n_features))
    bias = np.zeros(len(classes))
    traces = []
    for k, cls in enumerate(classes):
        signs = np.where(np.asarray(y) == cls, 1.0, -1.0)
        w, b, lr = W[k].copy(), 0.0, hyper.lr
        loss, gw, gb = head_loss_and_grad(X, signs, w, b, loss_kind, hyper.l2)
        trace = [loss]
        for _ in range(hyper.epochs):
            while lr > 1e-12:
                w_new, b_new = w - lr * gw, b - lr * gb
                new_loss, new_gw, new_gb = head_loss_and_grad(X, signs, w_new, b_new, loss_kind, hyper.l2)
                if not np.isfinite(new_loss):
                    raise NonFiniteLoss(f"class {cls}: loss became {new_loss}")
                if new_loss <= loss + 1e-9:
                    break
                lr /= 2
            else:
                trace.append(loss)
                continue
            w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
            trace.append(loss)
        W[k], bias[k] = w, b
        traces.append(trace)
    total = np.sum(traces, axis=0).tolist()
    return LinearModel(W, bias, loss_kind, classes, loss_trace=total)


def train(space: FeatureSpace, dataset: Sequence[Conversation], loss_kind: str,
          hyper: TrainHyper | None = None) -> LinearModel:
    missing = [c.id for c in dataset if c.issue_category is None]
    if missing:
        raise SingleClassError(f"{len(missing)} conversations have no issue_category")
    X = feature_matrix(space, [c.norms() for c in dataset])
    model = fit_linear(X, [c.issue_category for c in dataset], loss_kind, hyper)
    model.vocabulary_hash = space.digest()
    log.info("trained %s classifier on %d conversations, final loss %.6f",
             loss_kind, len(dataset), model.loss_trace[-1])
    return model


def predict_proba(model: LinearModel, X) -> np.ndarray:
    z = model.decision_function(X)
    if model.loss_kind == "logistic":
        s = np.exp(-np.logaddexp(0.0, -z))
    else:
        # uncalibrated: softmax over hinge margins
        s = np.exp(z - z.max(axis=1, keepdims=True))
    return s / s.sum(axis=1, keepdims=True)


def predict(model: LinearModel, X) -> list[str]:
    return [model.classes[i] for i in predict_proba(model, X).argmax(axis=1)]


def confusion_matrix(y_true: Sequence[str], y_pred: Sequence[str], classes: Sequence[str]) -> np.ndarray:
    idx = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[idx[t], idx[p]] += 1
    return cm


def prf_from_confusion(cm: np.ndarray) -> np.ndarray:
    """Rows = true class, columns = predicted. Returns (classes x 3) P/R/F1, 0 for 0/0."""
    cm = np.asarray(cm, dtype=float)
    tp = np.diag(cm)
    pred = cm.sum(axis=0)
    true = cm.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(pred > 0, tp / pred, 0.0)
        r = np.where(true > 0, tp / true, 0.0)
        f = np.where(p + r > 0, 2 * p * r / (p + r), 0.0)
    return np.stack([p, r, f], axis=1)


def evaluate_classifier(model: LinearModel, space: FeatureSpace,
                        test_set: Sequence[Conversation]) -> dict[str, dict[str, float]]:
    X = feature_matrix(space, [c.norms() for c in test_set])
    pred = predict(model, X)
    cm = confusion_matrix([c.issue_category for c in test_set], pred, model.classes)
    prf = prf_from_confusion(cm)
    return {
        c: {"precision": float(p), "recall": float(r), "f1": float(f)}
        for c, (p, r, f) in zip(model.classes, prf)
    }
