"""Local surrogate explanations over word-presence perturbations.

A black box is any callable mapping a (samples x positions) 0/1 mask matrix to
either a vector of scalar scores or a (samples x classes) score matrix.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from . import classify
from .errors import EmptyMessage

log = logging.getLogger(__name__)

BlackBox = Callable[[np.ndarray], np.ndarray]


@dataclass
class LimeConfig:
    n_samples: int = 5000
    kernel_width: float = 0.75
    ridge_l2: float = 1.0
    seed: int = 0


@dataclass
class Explanation:
    target_class: int | str
    word_weights: np.ndarray
    intercept: float
    fidelity_r2: float

    def to_json(self, tokens: Sequence[str] = (), config: LimeConfig | None = None) -> str:
        return json.dumps(
            {
                "target_class": self.target_class,
                "tokens": list(tokens),
                "weights": self.word_weights.tolist(),
                "intercept": self.intercept,
                "fidelity_r2": self.fidelity_r2,
                "config": asdict(config) if config else None,
            }
        )


def sample_perturbations(n_tokens: int, n_samples: int, seed: int | None = 0) -> np.ndarray:
    """All-ones first row, then rows with k ~ U{1..T} distinct positions zeroed."""
    if n_tokens == 0:
        raise EmptyMessage("cannot perturb an empty message")
    rng = np.random.default_rng(seed)
    masks = np.ones((n_samples, n_tokens), dtype=np.int8)
    for row in masks[1:]:
        k = rng.integers(1, n_tokens + 1)
        row[rng.choice(n_tokens, size=k, replace=False)] = 0
    return masks


def cosine_distance_to_full(masks: np.ndarray) -> np.ndarray:
    masks = np.atleast_2d(masks)
    kept = masks.sum(axis=1)
    return 1.0 - np.sqrt(kept / masks.shape[1])


def kernel_weight(mask, kernel_width: float = 0.75):
    d = cosine_distance_to_full(np.asarray(mask, dtype=float))
    w = np.exp(-(d ** 2) / kernel_width ** 2)
    return float(w[0]) if np.ndim(mask) == 1 else w


def weighted_ridge(X: np.ndarray, y: np.ndarray, weights: np.ndarray, l2: float):
    """Solve min sum w_i (y_i - b - x_i.beta)^2 + l2 |beta|^2, intercept unpenalized.

    Returns (beta, intercept, gram, rhs, theta) so callers can check the
    normal equations ``gram @ theta == rhs``.
    """
    design = np.hstack([np.ones((X.shape[0], 1)), X])
    penalty = l2 * np.eye(design.shape[1])
    penalty[0, 0] = 0.0
    gram = design.T @ (weights[:, None] * design) + penalty
    rhs = design.T @ (weights * y)
    theta = np.linalg.solve(gram, rhs)
    return theta[1:], float(theta[0]), gram, rhs, theta


def weighted_r2(y, y_hat, weights) -> float:
    mean = np.average(y, weights=weights)
    ss_res = float(np.sum(weights * (y - y_hat) ** 2))
    ss_tot = float(np.sum(weights * (y - mean) ** 2))
    if ss_tot <= 1e-300:
        return 1.0 if ss_res <= 1e-18 else 0.0
    return 1.0 - ss_res / ss_tot


def fit_surrogate(masks: np.ndarray, scores: np.ndarray, target_class: int | None,
                  config: LimeConfig) -> Explanation:
    """Weighted ridge fit of black-box scores on the perturbation masks."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 2:
        if target_class is None:
            target_class = int(np.argmax(scores[0]))
        y = scores[:, target_class]
    else:
        y = scores
        target_class = 0 if target_class is None else target_class
    if not np.all(np.isfinite(y)):
        raise ValueError("black box returned non-finite scores")
    weights = np.atleast_1d(kernel_weight(masks, config.kernel_width))
    X = masks.astype(float)
    if np.all(X == X[0]):
        log.warning("degenerate design: all %d perturbations identical", len(X))
        return Explanation(target_class, np.zeros(X.shape[1]), float(np.average(y, weights=weights)), 0.0)
    beta, intercept, _, _, _ = weighted_ridge(X, y, weights, config.ridge_l2)
    fidelity = weighted_r2(y, intercept + X @ beta, weights)
    return Explanation(target_class, beta, intercept, fidelity)


def explain(blackbox: BlackBox, n_tokens: int, target_class: int | None = None,
            config: LimeConfig | None = None) -> Explanation:
    """Explain ``blackbox`` around the full message; default target is its argmax class."""
    config = config or LimeConfig()
    masks = sample_perturbations(n_tokens, config.n_samples, config.seed)
    return fit_surrogate(masks, blackbox(masks), target_class, config)


def highlight_scores_from_explanation(explanation: Explanation) -> np.ndarray:
    return np.maximum(explanation.word_weights, 0.0)


def masked_token_lists(tokens: Sequence[str], masks: np.ndarray) -> list[list[str]]:
    return [[t for t, keep in zip(tokens, row) if keep] for row in masks]


def explain_with_classifiers(models: Sequence[classify.LinearModel], space: classify.FeatureSpace,
                             tokens: Sequence[str], config: LimeConfig | None = None) -> list[Explanation]:
    """Explain each model's argmax class on ``tokens`` using one shared perturbation set."""
    config = config or LimeConfig()
    masks = sample_perturbations(len(tokens), config.n_samples, config.seed)
    X = classify.feature_matrix(space, masked_token_lists(tokens, masks))
    return [fit_surrogate(masks, classify.predict_proba(m, X), None, config) for m in models]
