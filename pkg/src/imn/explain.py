"""Explanations read off the generated linear models."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import numpy as np

from .data import Dataset
from .net import GeneratedLinearModel, predict_logits, softmax


class LinearGenerator(Protocol):
    config: Any

    def generate(self, X: np.ndarray) -> GeneratedLinearModel: ...


@dataclass
class Attribution:
    index: int
    target_class: int
    impacts: np.ndarray
    bias: float
    logit: float

    def to_record(self, feature_names: Sequence[str]) -> dict[str, Any]:
        order = np.argsort(-np.abs(self.impacts), kind="stable")
        return {
            "instance": self.index,
            "class": self.target_class,
            "bias": self.bias,
            "logit": self.logit,
            "impacts": [{"feature": feature_names[m], "impact": float(self.impacts[m])} for m in order],
        }


@dataclass
class GlobalImportance:
    values: np.ndarray
    feature_names: list[str]

    @property
    def ranking(self) -> list[int]:
        # stable sort keeps the lower feature index first on ties
        return [int(m) for m in np.argsort(-self.values, kind="stable")]

    def to_records(self) -> list[dict[str, Any]]:
        return [
            {"rank": r + 1, "feature": self.feature_names[m], "importance": float(self.values[m])}
            for r, m in enumerate(self.ranking)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rank", "feature", "importance"])
        for rec in self.to_records():
            writer.writerow([rec["rank"], rec["feature"], repr(rec["importance"])])
        return buf.getvalue()


def _resolve_class(z: np.ndarray, class_choice: str | int) -> np.ndarray:
    n_classes = z.shape[-1]
    if class_choice == "predicted":
        return np.argmax(z, axis=-1)
    c = int(class_choice)
    if not 0 <= c < n_classes:
        raise ValueError(f"class index {c} out of range for {n_classes} classes")
    return np.full(z.shape[:-1], c)


def impacts(model: LinearGenerator, X: np.ndarray, class_choice: str | int = "predicted"):
    """Batched signed impacts ``w_m * x_m`` of the chosen class row.

    Returns ``(impacts (N, M), bias (N,), logit (N,), classes (N,))``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    lin = model.generate(X)
    z = predict_logits(lin, X)
    cls = _resolve_class(z, class_choice)
    rows = np.arange(len(X))
    w = lin.weights[rows, cls]
    return w * X, lin.bias[rows, cls], z[rows, cls], cls


def local_attribution(
    model: LinearGenerator, x: np.ndarray, class_choice: str | int = "predicted", index: int = 0
) -> Attribution:
    imp, bias, logit, cls = impacts(model, np.asarray(x)[None, :], class_choice)
    return Attribution(index, int(cls[0]), imp[0], float(bias[0]), float(logit[0]))


def removal_delta(model: LinearGenerator, x: np.ndarray, m: int, class_choice: str | int = "predicted") -> float:
    """Probability drop when feature ``m`` is zeroed, regenerating the weights at the masked input."""
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= m < len(x):
        raise ValueError(f"feature index {m} out of range")
    masked = x.copy()
    masked[m] = 0.0
    both = np.vstack([x, masked])
    p = softmax(predict_logits(model.generate(both), both))
    c = _resolve_class(predict_logits(model.generate(x[None]), x[None]), class_choice)[0]
    return float(p[0, c] - p[1, c])


def global_importance(model: LinearGenerator, dataset: Dataset) -> GlobalImportance:
    imp, _, _, _ = impacts(model, dataset.X, "predicted")
    return GlobalImportance(np.abs(imp).mean(axis=0), list(dataset.feature_names))


def grouped_importance(importance: GlobalImportance, groups: dict[str, list[int]]) -> GlobalImportance:
    """Sum transformed-column importances back onto their source columns."""
    names = list(groups)
    values = np.array([importance.values[idx].sum() for idx in groups.values()])
    return GlobalImportance(values, names)


def decision_boundary(
    model: LinearGenerator, box: tuple[float, float, float, float], grid_n: int = 200, percentile: float = 1.0
) -> np.ndarray:
    """Lattice points whose class-1 probability is closest to 0.5.

    ``box`` is ``(x_min, x_max, y_min, y_max)``. Points with ``|p - 0.5|`` at
    or below the given percentile of the grid are returned.
    """
    if model.config.input_dim != 2:
        raise ValueError(f"decision boundary needs 2 input features, model has {model.config.input_dim}")
    x_min, x_max, y_min, y_max = box
    gx, gy = np.meshgrid(np.linspace(x_min, x_max, grid_n), np.linspace(y_min, y_max, grid_n))
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    p = softmax(predict_logits(model.generate(grid), grid))[:, 1]
    dist = np.abs(p - 0.5)
    return grid[dist <= np.percentile(dist, percentile)]


def neighbor_sets(dataset: Dataset, k_per_class: int) -> np.ndarray:
    """Indices ``(N, C * k)``: the ``k`` nearest rows of every class, excluding the row itself."""
    if k_per_class < 1:
        raise ValueError("k_per_class must be >= 1")
    X, y = dataset.X, dataset.y
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(d2, np.inf)
    blocks = []
    for c in range(dataset.n_classes):
        members = np.flatnonzero(y == c)
        if len(members) - 1 < k_per_class:
            raise ValueError(f"class {c} has too few instances for k_per_class={k_per_class}")
        order = np.argsort(d2[:, members], axis=1, kind="stable")[:, :k_per_class]
        blocks.append(members[order])
    return np.hstack(blocks)


def neighborhood_accuracy(model: LinearGenerator, dataset: Dataset, k_per_class: int) -> tuple[float, np.ndarray]:
    """Accuracy of each row's own hyperplane on its per-class nearest neighbours."""
    nbrs = neighbor_sets(dataset, k_per_class)
    lin = model.generate(dataset.X)
    Xn = dataset.X[nbrs]
    z = np.einsum("ncm,nkm->nkc", lin.weights, Xn) + lin.bias[:, None, :]
    correct = np.argmax(z, axis=-1) == dataset.y[nbrs]
    per_instance = correct.mean(axis=1)
    return float(correct.mean()), per_instance


def dumps_attributions(attrs: Sequence[Attribution], feature_names: Sequence[str]) -> str:
    return "\n".join(json.dumps(a.to_record(feature_names), sort_keys=True) for a in attrs) + "\n"
