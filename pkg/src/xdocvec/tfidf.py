"""TF-IDF translation baseline.

Documents (the test side machine-translated into the training language
upstream) are scored over the top-k most frequent training words with a
smoothed inverse document frequency, then pushed through the same
center/normalize + linear-classifier protocol as the learned vectors.
"""

from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

from .classify import ClassifierConfig, EvalReport, cross_lingual_eval, prepare
from .errors import InputError


def select_features(train_docs: Sequence[str], top_k: int) -> list[str]:
    """The `top_k` most frequent words; frequency ties break lexicographically."""
    if top_k < 1:
        raise InputError(f"top_k must be at least 1, got {top_k}")
    counts = Counter()
    for doc in train_docs:
        counts.update(doc.split())
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [w for w, _ in ordered[:top_k]]


def _term_counts(docs: Sequence[str], index: dict[str, int]) -> np.ndarray:
    out = np.zeros((len(docs), len(index)))
    for i, doc in enumerate(docs):
        for word in doc.split():
            j = index.get(word)
            if j is not None:
                out[i, j] += 1.0
    return out


def tfidf_matrix(docs: Sequence[str], features: list[str],
                 idf: np.ndarray) -> np.ndarray:
    index = {w: i for i, w in enumerate(features)}
    return _term_counts(docs, index) * idf


def fit_idf(train_docs: Sequence[str], features: list[str]) -> np.ndarray:
    """Smoothed idf = ln((1 + n) / (1 + df)) + 1, so a term present in every
    document (or a single-document corpus) still gets a positive weight."""
    index = {w: i for i, w in enumerate(features)}
    df = (_term_counts(train_docs, index) > 0).sum(axis=0)
    n = len(train_docs)
    return np.log((1.0 + n) / (1.0 + df)) + 1.0


def tfidf_baseline(train_docs: Sequence[str], train_labels,
                   test_docs: Sequence[str], test_labels, top_k: int,
                   train_language: str = "a", test_language: str = "b",
                   cfg: ClassifierConfig | None = None) -> EvalReport:
    """End-to-end baseline: features and idf fitted on the training side only,
    then the usual prepare/train/evaluate protocol."""
    features = select_features(train_docs, top_k)
    idf = fit_idf(train_docs, features)
    x_train = tfidf_matrix(train_docs, features, idf)
    x_test = tfidf_matrix(test_docs, features, idf)
    train_set = prepare(x_train, train_labels, train_language)
    test_set = prepare(x_test, test_labels, test_language, fit_mean=train_set.mean)
    report = cross_lingual_eval(train_set, test_set, cfg,
                                config_echo={"baseline": "tfidf", "top_k": top_k,
                                             "n_features": len(features)})
    return report
