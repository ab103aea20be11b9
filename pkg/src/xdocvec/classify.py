"""Cross-lingual document classification protocol.

Vectors are centered with the training-language mean (reused verbatim on the
test language: the mean is part of the normalization record, never
recomputed) and row-normalized to unit length. The classifier is a linear
one-vs-rest hinge model with L2 regularization and class weights balanced
inversely to class frequency, trained by deterministic full-batch
subgradient descent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ContractError, DimensionError, InputError


@dataclass
class LabeledVectorSet:
    vectors: np.ndarray          # (n, d), prepared rows (unit or zero norm)
    labels: np.ndarray           # (n,) int category ids
    language: str
    mean: np.ndarray             # the centering vector that was subtracted
    zero_rows: list[int] = field(default_factory=list)


def prepare(vectors: np.ndarray, labels, language: str,
            fit_mean: np.ndarray | None = None) -> LabeledVectorSet:
    """Center then L2-normalize each row. With `fit_mean` given, that mean is
    subtracted instead of computing one here; this is how the test language
    reuses the training language's statistics. Zero rows stay zero and are
    flagged."""
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise InputError(f"need a non-empty (n, d) vector matrix, got {vectors.shape}")
    if labels.shape[0] != vectors.shape[0]:
        raise InputError(f"{vectors.shape[0]} vectors but {labels.shape[0]} labels")
    if fit_mean is None:
        mean = vectors.mean(axis=0)
    else:
        mean = np.asarray(fit_mean, dtype=np.float64)
        if mean.shape != (vectors.shape[1],):
            raise DimensionError(
                f"mean of shape {mean.shape} against vectors of width {vectors.shape[1]}")
    centered = vectors - mean
    norms = np.linalg.norm(centered, axis=1)
    zero_rows = [int(i) for i in np.nonzero(norms == 0.0)[0]]
    safe = np.where(norms == 0.0, 1.0, norms)
    prepared = centered / safe[:, None]
    return LabeledVectorSet(vectors=prepared, labels=labels, language=language,
                            mean=mean, zero_rows=zero_rows)


@dataclass
class ClassifierConfig:
    reg: float = 1e-4
    max_iter: int = 5000
    lr: float = 0.5
    tol: float = 1e-7
    seed: int = 0


@dataclass
class LinearClassifier:
    weights: np.ndarray          # (n_classes, d)
    biases: np.ndarray           # (n_classes,)
    classes: np.ndarray          # category ids, row order of weights
    class_weight: dict[int, float]
    reg: float
    iterations: int
    converged: bool

    def scores(self, vectors: np.ndarray) -> np.ndarray:
        return vectors @ self.weights.T + self.biases

    def predict(self, vectors: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.scores(vectors), axis=1)]


def balanced_class_weights(labels: np.ndarray) -> dict[int, float]:
    """weight_c = n_samples / (n_classes * count_c)."""
    classes, counts = np.unique(labels, return_counts=True)
    n = labels.shape[0]
    return {int(c): n / (len(classes) * int(k)) for c, k in zip(classes, counts)}


def train_classifier(data: LabeledVectorSet,
                     cfg: ClassifierConfig | None = None) -> LinearClassifier:
    """One-vs-rest hinge with L2 regularization and balanced class weights.

    Full-batch subgradient descent with a 1/sqrt(t) step decay: deterministic
    for any seed, stops at `tol` on the gradient or at `max_iter`.
    """
    cfg = cfg or ClassifierConfig()
    x, y = data.vectors, data.labels
    classes = np.unique(y)
    if len(classes) < 2:
        raise InputError(f"need at least 2 classes, got {len(classes)}")
    n, d = x.shape
    weight_map = balanced_class_weights(y)
    sample_w = np.array([weight_map[int(label)] for label in y])
    targets = np.where(y[:, None] == classes[None, :], 1.0, -1.0)  # (n, C)
    w = np.zeros((len(classes), d))
    b = np.zeros(len(classes))
    converged = False
    iterations = cfg.max_iter
    for t in range(1, cfg.max_iter + 1):
        margins = 1.0 - targets * (x @ w.T + b)          # (n, C)
        active = (margins > 0.0) * sample_w[:, None]
        coef = -(targets * active) / n                   # (n, C)
        grad_w = coef.T @ x + cfg.reg * w
        grad_b = coef.sum(axis=0)
        gmax = max(np.abs(grad_w).max(), np.abs(grad_b).max())
        if gmax < cfg.tol:
            converged = True
            iterations = t - 1
            break
        step = cfg.lr / np.sqrt(t)
        w -= step * grad_w
        b -= step * grad_b
    return LinearClassifier(weights=w, biases=b, classes=classes,
                            class_weight=weight_map, reg=cfg.reg,
                            iterations=iterations, converged=converged)


@dataclass
class EvalReport:
    accuracy: float
    per_class_recall: dict[int, float]
    confusion: np.ndarray        # rows true class, columns predicted
    classes: np.ndarray
    n_test: int
    train_language: str
    test_language: str
    config_echo: dict[str, Any] = field(default_factory=dict)

    def format(self) -> str:
        lines = [
            f"cross-lingual evaluation: train[{self.train_language}] -> "
            f"test[{self.test_language}]",
            f"accuracy: {self.accuracy:.4f} ({self.n_test} documents)",
            "per-class recall:",
        ]
        for c in self.classes:
            lines.append(f"  class {int(c)}: {self.per_class_recall[int(c)]:.4f}")
        lines.append("confusion matrix (rows true, columns predicted):")
        header = "        " + " ".join(f"{int(c):>6d}" for c in self.classes)
        lines.append(header)
        for i, c in enumerate(self.classes):
            row = " ".join(f"{int(v):>6d}" for v in self.confusion[i])
            lines.append(f"  {int(c):>4d}: {row}")
        if self.config_echo:
            lines.append("config:")
            for k in sorted(self.config_echo):
                lines.append(f"  {k} = {self.config_echo[k]}")
        return "\n".join(lines) + "\n"


def evaluate(clf: LinearClassifier, data: LabeledVectorSet,
             train_language: str = "?",
             config_echo: dict[str, Any] | None = None) -> EvalReport:
    predictions = clf.predict(data.vectors)
    classes = clf.classes
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    index = {int(c): i for i, c in enumerate(classes)}
    for true, pred in zip(data.labels, predictions):
        confusion[index[int(true)], index[int(pred)]] += 1
    recall = {}
    for c in classes:
        i = index[int(c)]
        total = confusion[i].sum()
        recall[int(c)] = float(confusion[i, i] / total) if total else 0.0
    accuracy = float((predictions == data.labels).mean())
    return EvalReport(accuracy=accuracy, per_class_recall=recall,
                      confusion=confusion, classes=classes,
                      n_test=len(data.labels), train_language=train_language,
                      test_language=data.language,
                      config_echo=config_echo or {})


def cross_lingual_eval(train_set: LabeledVectorSet, test_set: LabeledVectorSet,
                       cfg: ClassifierConfig | None = None,
                       config_echo: dict[str, Any] | None = None) -> EvalReport:
    """Train on one language's prepared vectors, score the other's. Both sets
    must have been centered with the training-language mean."""
    if train_set.vectors.shape[1] != test_set.vectors.shape[1]:
        raise DimensionError(
            f"vector widths disagree across languages: {train_set.vectors.shape[1]} "
            f"vs {test_set.vectors.shape[1]} (inconsistent variant?)")
    if not np.array_equal(train_set.mean, test_set.mean):
        raise ContractError(
            "test set was not centered with the training-language mean")
    clf = train_classifier(train_set, cfg)
    return evaluate(clf, test_set, train_language=train_set.language,
                    config_echo=config_echo)
