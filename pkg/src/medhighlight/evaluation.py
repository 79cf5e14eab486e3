"""Token-level highlight metrics, annotator agreement, and the fine-tuning learning curve.

All metrics pool tokens across messages (micro-averaging). PR-AUC is the
step-wise average precision, not a trapezoidal area.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .corpus import AnnotationSet, Conversation, Message
from .errors import InsufficientData, NotEnoughChats, SingleClass

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("model", "threshold", "precision", "recall", "roc_auc", "pr_auc")


@dataclass
class ScoredTokens:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.scores.shape != self.labels.shape:
            raise ValueError("scores and labels must have equal length")

    def _check_both_classes(self):
        n_pos = int(self.labels.sum())
        if n_pos == 0 or n_pos == len(self.labels):
            raise SingleClass("AUC needs at least one positive and one negative label")
        return n_pos, len(self.labels) - n_pos


@dataclass
class MetricsReport:
    model: str
    threshold: float
    precision: float
    recall: float
    roc_auc: float
    pr_auc: float

    def row(self) -> list[str]:
        return [self.model] + [f"{v:.6f}" for v in
                               (self.threshold, self.precision, self.recall, self.roc_auc, self.pr_auc)]


@dataclass
class LearningCurve:
    mode: str
    points: list[tuple[int, float]] = field(default_factory=list)

    def slope(self) -> float:
        n, y = np.array(self.points, dtype=float).T
        return float(np.polyfit(n, y, 1)[0])


def precision_recall_at(data: ScoredTokens, threshold: float) -> tuple[float, float]:
    pred = data.scores >= threshold
    gold = data.labels == 1
    tp = int(np.sum(pred & gold))
    fp = int(np.sum(pred & ~gold))
    fn = int(np.sum(~pred & gold))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall


def roc_auc(data: ScoredTokens) -> float:
    """Mann-Whitney U / (n_pos * n_neg), ties counted as one half via midranks."""
    n_pos, n_neg = data._check_both_classes()
    ranks = rankdata(data.scores)  # average ranks for ties
    u = ranks[data.labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pr_auc(data: ScoredTokens) -> float:
    n_pos, _ = data._check_both_classes()
    order = np.argsort(-data.scores, kind="mergesort")
    scores = data.scores[order]
    labels = data.labels[order]
    # last index of each block of tied scores
    cut = np.r_[np.nonzero(np.diff(scores))[0], len(scores) - 1]
    tp = np.cumsum(labels)[cut]
    fp = (cut + 1) - tp
    precision = tp / (tp + fp)
    recall_gain = np.diff(np.r_[0, tp]) / n_pos
    # summed sequentially from the highest threshold down, so results do not depend on array blocking
    return float(np.cumsum(recall_gain * precision)[-1])


def krippendorff_alpha(annotations: AnnotationSet) -> float:
    """Nominal Krippendorff's alpha from the coincidence matrix; ``nan`` marks missing ratings."""
    labels = annotations.labels
    values = np.unique(labels[~np.isnan(labels)])
    index = {v: k for k, v in enumerate(values)}
    coincidence = np.zeros((len(values), len(values)))
    for unit in labels.T:
        rated = unit[~np.isnan(unit)]
        m = len(rated)
        if m < 2:
            continue
        counts = np.zeros(len(values))
        for v in rated:
            counts[index[v]] += 1
        coincidence += (np.outer(counts, counts) - np.diag(counts)) / (m - 1)
    n = coincidence.sum()
    if n == 0:
        raise InsufficientData("need at least one unit rated by two or more annotators")
    marginals = coincidence.sum(axis=0)
    observed = n - np.trace(coincidence)
    expected = (n * n - np.sum(marginals ** 2)) / (n - 1)
    if observed == 0:
        return 1.0
    return float(1.0 - observed / expected)


Scorer = Callable[[Sequence[Message]], list[np.ndarray]]


def pooled_tokens(scorer: Scorer, conversations: Sequence[Conversation]) -> ScoredTokens:
    """Scores and gold labels for every token of every patient message."""
    messages = [m for c in conversations for m in c.patient_messages if m.gold is not None and m.tokens]
    if not messages:
        return ScoredTokens(np.zeros(0), np.zeros(0, dtype=int))
    scores = scorer(messages)
    return ScoredTokens(np.concatenate(scores), np.concatenate([m.gold for m in messages]))


def metrics_report(name: str, data: ScoredTokens, threshold: float) -> MetricsReport:
    p, r = precision_recall_at(data, threshold)
    return MetricsReport(name, threshold, p, r, roc_auc(data), pr_auc(data))


def evaluate_model(scorer: Scorer, dataset: Sequence[Conversation], threshold: float,
                   name: str = "model") -> MetricsReport:
    return metrics_report(name, pooled_tokens(scorer, dataset), threshold)


def metrics_csv(reports: Sequence[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()


def metrics_json(reports: Sequence[MetricsReport]) -> str:
    return json.dumps([asdict(r) for r in reports], indent=2)


def curves_csv(curves: Sequence[LearningCurve]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("n", "pr_auc", "mode"))
    for curve in curves:
        for n, value in curve.points:
            writer.writerow((n, f"{value:.6f}", curve.mode))
    return buf.getvalue()


def curve_subsets(n_chats: int, step: int, max_n: int, seed: int, nested: bool = True) -> list[list[int]]:
    """Index subsets of the training set for n = 0, step, ..., max_n."""
    if max_n > n_chats:
        raise NotEnoughChats(f"curve needs {max_n} training chats, only {n_chats} available")
    rng = np.random.default_rng(seed)
    sizes = list(range(0, max_n + 1, step))
    if nested:
        perm = rng.permutation(n_chats)
        return [sorted(perm[:n].tolist()) for n in sizes]
    return [sorted(rng.choice(n_chats, size=n, replace=False).tolist()) for n in sizes]


def learning_curve(base_params, config, train_set: Sequence[Conversation], test_set: Sequence[Conversation],
                   hyper, step: int = 10, max_n: int = 300, seed: int = 0,
                   nested: bool = True) -> LearningCurve:
    """Restore ``base_params`` for each n, fine-tune on n chats, record test PR-AUC."""
    from . import tagger

    curve = LearningCurve(config.mode)
    for subset in curve_subsets(len(train_set), step, max_n, seed, nested):
        chats = [train_set[i] for i in subset]
        params, _ = tagger.finetune(base_params, chats, config, hyper)
        data = pooled_tokens(lambda msgs: tagger.predict_messages(params, config, msgs), test_set)
        curve.points.append((len(subset), pr_auc(data)))
        log.info("curve %s n=%d pr_auc=%.4f", config.mode, len(subset), curve.points[-1][1])
    return curve
