"""White-box comparators, AUROC and top-k feature removal."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .data import Dataset
from .net import softmax


@dataclass
class LinearBaseline:
    weights: np.ndarray  # (M, C)
    bias: np.ndarray  # (C,)

    def logits(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X) @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.logits(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)


def logreg_loss_grad(
    weights: np.ndarray, bias: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus ``l2 * ||W||^2 / 2`` and its gradients (bias unpenalized)."""
    z = X @ weights + bias
    z = z - z.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(len(X))
    loss = -np.mean(log_p[rows, y]) + 0.5 * l2 * np.sum(weights**2)
    dz = np.exp(log_p)
    dz[rows, y] -= 1.0
    dz /= len(X)
    return float(loss), X.T @ dz + l2 * weights, dz.sum(axis=0)


def train_logreg(dataset: Dataset, l2: float = 1e-4, lr: float = 0.5, iters: int = 2000, seed: int = 0) -> LinearBaseline:
    """Full-batch gradient descent from zero weights.

    ``seed`` is accepted for interface symmetry; the zero start makes the fit
    deterministic without it.
    """
    if l2 < 0:
        raise ValueError("l2 must be non-negative")
    X, y = dataset.X, dataset.y
    C = dataset.n_classes
    W = np.zeros((X.shape[1], C))
    b = np.zeros(C)
    for it in range(iters):
        loss, gW, gb = logreg_loss_grad(W, b, X, y, l2)
        if not np.isfinite(loss):
            raise FloatingPointError(f"logistic regression diverged at iteration {it}")
        W -= lr * gW
        b -= lr * gb
    return LinearBaseline(W, b)


@dataclass
class TreeBaseline:
    """Flat arrays; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, C) class distribution
    max_depth: int
    min_samples_leaf: int

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            active = f >= 0
            if not active.any():
                return node
            idx = np.flatnonzero(active)
            go_left = X[idx, f[idx]] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


def gini(counts: np.ndarray) -> np.ndarray:
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / n[..., None]
    return np.where(n > 0, 1.0 - np.sum(p * p, axis=-1), 0.0)


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int, min_samples_leaf: int = 1):
    """Greedy Gini split ``(feature, threshold, weighted child impurity)`` or ``None``.

    Thresholds are midpoints between sorted unique values. Ties go to the
    lowest feature index, then the lowest threshold.
    """
    n = len(y)
    if n < 2:
        return None
    onehot = np.eye(n_classes)[y]
    total = onehot.sum(axis=0)
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        n_left = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_samples_leaf) & (n - n_left >= min_samples_leaf)
        if not valid.any():
            continue
        score = (n_left * gini(left) + (n - n_left) * gini(right)) / n
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if best is None or score[i] < best[2]:
            best = (f, 0.5 * (xs[i] + xs[i + 1]), float(score[i]))
    return best


def train_cart(dataset: Dataset, max_depth: int = 5, min_samples_leaf: int = 1) -> TreeBaseline:
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    X, y, C = dataset.X, dataset.y, dataset.n_classes
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx: np.ndarray, depth: int) -> int:
        node = len(feature)
        counts = np.bincount(y[idx], minlength=C).astype(float)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        if depth >= max_depth or np.count_nonzero(counts) <= 1:
            return node
        split = best_split(X[idx], y[idx], C, min_samples_leaf)
        if split is None:
            return node
        f, t, _ = split
        mask = X[idx, f] <= t
        feature[node], threshold[node] = f, t
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return TreeBaseline(
        np.array(feature), np.array(threshold), np.array(left), np.array(right), np.array(value),
        max_depth, min_samples_leaf,
    )


def _binary_auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes present")
    ranks = rankdata(scores)  # average ranks count ties as 1/2
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank AUROC; 2-D scores give the macro one-vs-rest average over classes present."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim == 1:
        return _binary_auroc(scores, labels.astype(int))
    if scores.shape[1] == 2:
        return _binary_auroc(scores[:, 1], labels.astype(int))
    present = np.unique(labels)
    if len(present) < 2:
        raise ValueError("AUROC needs at least two classes present")
    return float(np.mean([_binary_auroc(scores[:, c], (labels == c).astype(int)) for c in present]))


def gain(method_auroc: float, tree_auroc: float) -> float:
    if tree_auroc <= 0:
        raise ValueError("tree AUROC must be positive")
    return method_auroc / tree_auroc


def topk_removal_curve(
    train_set: Dataset,
    val_set: Dataset,
    ranking: Sequence[int],
    k_max: int,
    train_cfg,
    seeds: Sequence[int] = (0,),
    net_overrides=None,
) -> list[tuple[int, float]]:
    """Mean validation accuracy after zeroing the top-``k`` ranked features, ``k = 0..k_max``."""
    from dataclasses import replace

    from .metrics import retrain_accuracy

    if k_max >= train_set.n_features:
        raise ValueError("k_max must be smaller than the feature count")
    curve = []
    for k in range(k_max + 1):
        accs = [
            retrain_accuracy(
                train_set, val_set, list(ranking[:k]), replace(train_cfg, seed=s), {**(net_overrides or {}), "seed": s}
            )
            for s in seeds
        ]
        curve.append((k, float(np.mean(accs))))
    return curve


def single_removal_accuracies(
    train_set: Dataset, val_set: Dataset, features: Sequence[int], train_cfg, seeds: Sequence[int] = (0,), net_overrides=None
) -> dict[int, float]:
    """Mean validation accuracy after zeroing each listed feature on its own."""
    from dataclasses import replace

    from .metrics import retrain_accuracy

    return {
        f: float(np.mean([
            retrain_accuracy(train_set, val_set, [f], replace(train_cfg, seed=s), {**(net_overrides or {}), "seed": s})
            for s in seeds
        ]))
        for f in features
    }
