# shotsense/services/classify.py
"""
Small classifiers and the k-fold evaluation protocol.

Both models rescale every feature to [0, 1] with the min/max of their training
split. Ties are always resolved towards the smallest class index.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Literal

import numpy as np

from shotsense.errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyClassError,
    KTooLargeError,
    NotBinaryError,
    TooFewExamplesError,
)
from shotsense.models import EvalReport, FeatureVector, LabeledDataset

log = logging.getLogger(__name__)

POSITIVE_LABEL = "gunshot"


@dataclass(frozen=True, eq=False)
class MinMaxScale:
    mins: np.ndarray
    maxs: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "MinMaxScale":
        return cls(mins=x.min(axis=0), maxs=x.max(axis=0))

    def apply(self, x: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        span = np.where(span > 0, span, 1.0)
        return (x - self.mins) / span


class Model(ABC):
    """A trained classifier over one LabeledDataset's classes."""

    class_names: tuple[str, ...]
    scale: MinMaxScale

    @property
    def dim(self) -> int:
        return int(self.scale.mins.size)

    @abstractmethod
    def predict_indices(self, x: np.ndarray) -> np.ndarray:
        """Class indices for the rows of an unscaled feature matrix."""
        raise NotImplementedError

    def predict(self, fv: FeatureVector) -> str:
        if len(fv) != self.dim:
            raise DimensionMismatchError(f"model expects {self.dim} features, got {len(fv)}")
        idx = self.predict_indices(np.array([fv.values], dtype=np.float64))[0]
        return self.class_names[int(idx)]


# ---------------------------------------------------------------------
# Linear SVM
# ---------------------------------------------------------------------
@dataclass(eq=False)
class LinearSvmModel(Model):
    weights: np.ndarray
    bias: float
    c_param: float
    scale: MinMaxScale
    class_names: tuple[str, ...]
    epochs: int
    seed: int

    def decision(self, x: np.ndarray) -> np.ndarray:
        return self.scale.apply(x) @ self.weights + self.bias

    def predict_indices(self, x: np.ndarray) -> np.ndarray:
        # zero margin falls to class 0
        return (self.decision(x) > 0).astype(np.int64)


def _class_counts(data: LabeledDataset) -> np.ndarray:
    _, y = data.matrix()
    return np.bincount(y, minlength=len(data.class_names))


def train_linear_svm(data: LabeledDataset, c_param: float = 100.0, seed: int = 0, *, epochs: int = 500) -> LinearSvmModel:
    """
    Minimize (1/2)||w||^2 + C * mean(hinge) by full-batch subgradient steps with
    the 1/(lambda t) schedule (lambda = 1/C) and projection onto the ball of radius
    sqrt(C); the returned (w, b) averages the second half of the iterates.

    C multiplies the mean hinge loss, so duplicating every example leaves the
    problem unchanged. The batch is the whole training set, so the result depends
    on the seed only through the examples' order of summation.
    """
    if len(data.class_names) != 2:
        raise NotBinaryError(f"linear SVM needs exactly 2 classes, got {len(data.class_names)}")
    counts = _class_counts(data)
    if np.any(counts == 0):
        empty = [c for c, n in zip(data.class_names, counts) if n == 0]
        raise EmptyClassError(f"no training examples for class(es): {', '.join(empty)}")
    if c_param <= 0 or epochs < 1:
        raise ConfigError("c_param and epochs must be positive")

    x, y = data.matrix()
    order = np.random.default_rng(seed).permutation(len(y))
    x, y = x[order], y[order]
    scale = MinMaxScale.fit(x)
    xs = scale.apply(x)
    ys = np.where(y == 1, 1.0, -1.0)
    n, d = xs.shape
    lam = 1.0 / c_param
    radius = 1.0 / np.sqrt(lam)

    w = np.zeros(d)
    b = 0.0
    w_sum = np.zeros(d)
    b_sum = 0.0
    n_avg = 0
    for t in range(1, epochs + 1):
        eta = 1.0 / (lam * t)
        viol = ys * (xs @ w + b) < 1.0
        grad_w = lam * w - (ys[viol] @ xs[viol]) / n
        grad_b = -float(ys[viol].sum()) / n
        w = w - eta * grad_w
        b = b - eta * grad_b
        norm = float(np.linalg.norm(w))
        if norm > radius:
            w = w * (radius / norm)
        if t > epochs // 2:
            w_sum += w
            b_sum += b
            n_avg += 1

    model = LinearSvmModel(
        weights=w_sum / n_avg,
        bias=b_sum / n_avg,
        c_param=c_param,
        scale=scale,
        class_names=data.class_names,
        epochs=epochs,
        seed=seed,
    )
    log.debug("svm trained on %d x %d, |w|=%.3f b=%.3f", n, d, np.linalg.norm(model.weights), model.bias)
    return model


# ---------------------------------------------------------------------
# k-NN
# ---------------------------------------------------------------------
@dataclass(eq=False)
class KnnModel(Model):
    examples: np.ndarray  # rescaled training rows
    labels: np.ndarray  # class indices
    k: int
    scale: MinMaxScale
    class_names: tuple[str, ...]

    def predict_indices(self, x: np.ndarray) -> np.ndarray:
        q = self.scale.apply(x)
        out = np.empty(q.shape[0], dtype=np.int64)
        for i, row in enumerate(q):
            dist = np.sqrt(np.sum((self.examples - row) ** 2, axis=1))
            nearest = np.argsort(dist, kind="stable")[: self.k]
            votes = np.bincount(self.labels[nearest], minlength=len(self.class_names))
            out[i] = int(np.argmax(votes))  # first maximum = smallest class index
        return out


def train_knn(data: LabeledDataset, k: int = 5) -> KnnModel:
    if k < 1 or k > len(data):
        raise KTooLargeError(f"k={k} must lie in [1, {len(data)}]")
    x, y = data.matrix()
    scale = MinMaxScale.fit(x)
    return KnnModel(examples=scale.apply(x), labels=y, k=k, scale=scale, class_names=data.class_names)


def predict(model: Model, fv: FeatureVector) -> str:
    return model.predict(fv)


# ---------------------------------------------------------------------
# Algorithm selection
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class AlgorithmSpec:
    name: Literal["svm", "knn"] = "svm"
    c_param: float = 100.0
    epochs: int = 500
    k: int = 5

    @property
    def display_name(self) -> str:
        return "Linear SVM" if self.name == "svm" else f"k-NN (k={self.k})"


def get_algorithm(name: str, **params: float | int) -> AlgorithmSpec:
    name = (name or "svm").lower()
    if name not in ("svm", "knn"):
        raise ConfigError(f"unknown algorithm: {name} (expected svm or knn)")
    return AlgorithmSpec(name=name, **params)  # type: ignore[arg-type]


def train(data: LabeledDataset, algorithm: AlgorithmSpec, seed: int = 0) -> Model:
    if algorithm.name == "svm":
        return train_linear_svm(data, algorithm.c_param, seed, epochs=algorithm.epochs)
    return train_knn(data, algorithm.k)


# ---------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------
def stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """
    Fold id per example. Each class is shuffled and dealt round-robin, continuing
    the deal across classes, so fold sizes differ by at most one.
    """
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    dealt = 0
    for c in np.unique(y):
        members = rng.permutation(np.flatnonzero(y == c))
        fold_of[members] = (dealt + np.arange(members.size)) % folds
        dealt += members.size
    return fold_of


def resolve_positive(class_names: tuple[str, ...], positive_label: str | None) -> int:
    if positive_label is not None:
        if positive_label not in class_names:
            raise ConfigError(f"positive label {positive_label!r} not among classes {class_names}")
        return class_names.index(positive_label)
    if POSITIVE_LABEL in class_names:
        return class_names.index(POSITIVE_LABEL)
    return 1 if len(class_names) > 1 else 0


def cross_validate(
    data: LabeledDataset,
    algorithm: AlgorithmSpec | str = "svm",
    folds: int = 8,
    seed: int = 0,
    *,
    positive_label: str | None = None,
) -> EvalReport:
    """
    Seeded stratified k-fold evaluation. TPR and FPR are micro-averaged: counts
    are summed over folds before dividing.
    """
    spec = get_algorithm(algorithm) if isinstance(algorithm, str) else algorithm
    if folds < 2:
        raise TooFewExamplesError(f"folds must be >= 2, got {folds}")
    _, y = data.matrix()
    counts = np.bincount(y, minlength=len(data.class_names))
    if len(data.class_names) < 2 or np.any(counts < folds):
        detail = ", ".join(f"{c}={n}" for c, n in zip(data.class_names, counts))
        raise TooFewExamplesError(f"every class needs >= {folds} examples for {folds}-fold CV ({detail})")
    pos = resolve_positive(data.class_names, positive_label)

    fold_of = stratified_folds(y, folds, seed)
    x, _ = data.matrix()
    per_fold: list[tuple[int, int, int, int]] = []
    for f in range(folds):
        train_idx = np.flatnonzero(fold_of != f)
        test_idx = np.flatnonzero(fold_of == f)
        model = train(data.subset(train_idx.tolist()), spec, seed)
        pred = model.predict_indices(x[test_idx])
        truth = y[test_idx]
        tp = int(np.sum((pred == pos) & (truth == pos)))
        fp = int(np.sum((pred == pos) & (truth != pos)))
        tn = int(np.sum((pred != pos) & (truth != pos)))
        fn = int(np.sum((pred != pos) & (truth == pos)))
        per_fold.append((tp, fp, tn, fn))
        log.debug("fold %d: tp=%d fp=%d tn=%d fn=%d", f, tp, fp, tn, fn)

    tp, fp, tn, fn = (int(v) for v in np.sum(np.array(per_fold), axis=0))
    total = tp + fp + tn + fn
    return EvalReport(
        folds=folds,
        per_fold=tuple(per_fold),
        tpr=tp / (tp + fn) if tp + fn else 0.0,
        fpr=fp / (fp + tn) if fp + tn else 0.0,
        accuracy=(tp + tn) / total if total else 0.0,
        feature_kind=data.kind,
        algorithm_name=spec.display_name,
        positive_label=data.class_names[pos],
        seed=seed,
    )
