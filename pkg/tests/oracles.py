"""Slow, obviously-correct reference implementations used as test oracles.

None of these import the package's own scoring code.
"""

import math
from itertools import combinations, permutations

import numpy as np


def occurrences(t, d):
    n = len(t)
    return sum(1 for i in range(len(d) - n + 1) if list(d[i:i + n]) == list(t))


def all_ngrams(d, max_n=3):
    return {tuple(d[i:i + n]) for n in range(1, max_n + 1) for i in range(len(d) - n + 1)}


def tfidf_df(corpus, t):
    return sum(1 for doc in corpus if occurrences(t, doc) > 0)


def tfidf_score(corpus, t, d):
    df = tfidf_df(corpus, t)
    f = occurrences(t, d)
    if df == 0 or f == 0:
        return 0.0
    return f * math.log(len(corpus) / df)


def tfidf_word_scores(corpus, d):
    raw = {t: tfidf_score(corpus, t, d) for t in all_ngrams(d)}
    norm = math.sqrt(sum(v * v for v in raw.values()))
    out = []
    for i in range(len(d)):
        best = 0.0
        for (t, v) in raw.items():
            n = len(t)
            for s in range(max(0, i - n + 1), i + 1):
                if s + n <= len(d) and tuple(d[s:s + n]) == t and norm > 0:
                    best = max(best, v / norm)
        out.append(best)
    return out


def roc_auc_pairs(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def average_precision_cuts(scores, labels):
    """Sum over distinct thresholds (high to low) of recall gain times precision."""
    n_pos = sum(labels)
    ap, prev_tp = 0.0, 0
    for theta in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if s >= theta and y == 1)
        k = sum(1 for s in scores if s >= theta)
        ap += ((tp - prev_tp) / n_pos) * (tp / k)
        prev_tp = tp
    return ap


def precision_recall_counts(scores, labels, threshold):
    tp = fp = fn = 0
    for s, y in zip(scores, labels):
        if s >= threshold and y == 1:
            tp += 1
        elif s >= threshold:
            fp += 1
        elif y == 1:
            fn += 1
    return (tp / (tp + fp) if tp + fp else 0.0), (tp / (tp + fn) if tp + fn else 0.0)


def krippendorff_pairwise(matrix):
    """Nominal alpha by enumerating ordered pairs of pairable values directly."""
    units = []
    for col in np.asarray(matrix, dtype=float).T:
        vals = [v for v in col if not np.isnan(v)]
        if len(vals) >= 2:
            units.append(vals)
    n = sum(len(u) for u in units)
    disagree_within = 0.0
    for u in units:
        m = len(u)
        disagree_within += sum(1 for a, b in permutations(range(m), 2) if u[a] != u[b]) / (m - 1)
    pooled = [v for u in units for v in u]
    disagree_all = sum(2 for a, b in combinations(range(n), 2) if pooled[a] != pooled[b])
    d_o = disagree_within / n
    d_e = disagree_all / (n * (n - 1))
    if d_o == 0:
        return 1.0
    return 1.0 - d_o / d_e


def majority_vote(rows):
    return [int(sum(col) * 2 > len(col)) for col in zip(*rows)]


def prf_counts(y_true, y_pred, classes):
    out = []
    for c in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        n_pred = sum(1 for p in y_pred if p == c)
        n_true = sum(1 for t in y_true if t == c)
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_true if n_true else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        out.append((p, r, f))
    return out


def finite_difference(f, x, h=1e-6):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        up = f(x)
        x[idx] = old - h
        down = f(x)
        x[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g
