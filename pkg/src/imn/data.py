"""Tabular ingest, preprocessing and synthetic dataset generators."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

MISSING_CATEGORY = "__missing__"
TASKS = ("binary", "multiclass", "regression")
KINDS = ("numeric", "categorical", "target")
XAI_KINDS = ("gaussian-linear", "gaussian-nonlinear-additive", "gaussian-piecewise-constant")
NONLINEARITIES = ("sin", "tanh", "square", "identity")


class SchemaError(ValueError):
    pass


class CSVParseError(ValueError):
    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row


@dataclass
class RawTable:
    """String cells with a declared kind per column; ``None`` marks a missing cell."""

    columns: list[tuple[str, str]]
    rows: list[list[str | None]]

    def __post_init__(self):
        kinds = [kind for _, kind in self.columns]
        for kind in kinds:
            if kind not in KINDS:
                raise SchemaError(f"unknown column kind {kind!r}")
        if kinds.count("target") != 1:
            raise SchemaError("exactly one target column is required")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise CSVParseError(f"row {i} has {len(row)} cells, expected {len(self.columns)}", i)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.columns]

    @property
    def target_index(self) -> int:
        return [kind for _, kind in self.columns].index("target")

    def column(self, name: str) -> list[str | None]:
        j = self.names.index(name)
        return [row[j] for row in self.rows]


def load_csv(path: str | Path, schema: Mapping[str, str]) -> RawTable:
    """Read a headed UTF-8 CSV. ``schema`` maps every header name to its kind.

    Empty cells become ``None``. Row numbers in errors are 1-based data rows
    (the header is row 0).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        unknown = [h for h in header if h not in schema]
        if unknown:
            raise SchemaError(f"unknown column(s) {unknown}; declare them in the schema")
        absent = [name for name in schema if name not in header]
        if absent:
            raise SchemaError(f"schema column(s) {absent} not present in header")
        rows: list[list[str | None]] = []
        for i, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise CSVParseError(
                    f"{path}: row {i} has {len(record)} cells, expected {len(header)}", i
                )
            rows.append([cell if cell != "" else None for cell in record])
    return RawTable(columns=[(h, schema[h]) for h in header], rows=rows)


def infer_schema(path: str | Path, target: str, categorical: Sequence[str] = ()) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh))]
    if target not in header:
        raise SchemaError(f"target column {target!r} not in header")
    schema = {}
    for name in header:
        if name == target:
            schema[name] = "target"
        elif name in categorical:
            schema[name] = "categorical"
        else:
            schema[name] = "numeric"
    return schema


def infer_task(values: Sequence[str | None]) -> str:
    present = {v for v in values if v is not None}
    if len(present) <= 2:
        return "binary"
    try:
        numbers = [float(v) for v in present]
    except ValueError:
        return "multiclass"
    if all(n.is_integer() for n in numbers) and len(present) <= 20:
        return "multiclass"
    return "regression"


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    n_classes: int
    task: str = "binary"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ValueError(f"X must be a non-empty 2-D matrix, got shape {self.X.shape}")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains missing or non-finite cells")
        if self.task == "regression":
            self.y = np.asarray(self.y, dtype=np.float64)
        else:
            self.y = np.asarray(self.y, dtype=np.int64)
            if self.y.size and (self.y.min() < 0 or self.y.max() >= self.n_classes):
                raise ValueError("class index out of range")
        if len(self.y) != len(self.X):
            raise ValueError("X and y disagree on the number of rows")
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("one feature name per column is required")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], list(self.feature_names), self.n_classes, self.task)

    def with_zeroed(self, features: Sequence[int]) -> "Dataset":
        X = self.X.copy()
        X[:, list(features)] = 0.0
        return Dataset(X, self.y.copy(), list(self.feature_names), self.n_classes, self.task)


@dataclass
class PreprocessorState:
    """Everything needed to replay the fitted transform on new rows.

    ``numeric`` maps a column to ``(mean, std)``; ``onehot`` maps a column to
    its ordered category list; ``target_encoding`` maps a column to
    ``{category: value}`` plus the global mean used for unseen categories.
    """

    task: str
    target: str
    columns: list[tuple[str, str]]
    numeric: dict[str, tuple[float, float]] = field(default_factory=dict)
    constant: list[str] = field(default_factory=list)
    onehot: dict[str, list[str]] = field(default_factory=dict)
    target_encoding: dict[str, dict[str, float]] = field(default_factory=dict)
    global_mean: float = 0.0
    shrinkage: float = 10.0
    classes: list[str] = field(default_factory=list)

    FORMAT_VERSION = 1

    @property
    def n_classes(self) -> int:
        return 1 if self.task == "regression" else len(self.classes)

    @property
    def feature_names(self) -> list[str]:
        names = []
        for name, kind in self.columns:
            if kind == "numeric" or name in self.target_encoding:
                names.append(name)
            elif kind == "categorical":
                names.extend(f"{name}={cat}" for cat in self.onehot[name])
        return names

    @property
    def feature_groups(self) -> dict[str, list[int]]:
        """Original column name -> indices of the transformed columns it produced."""
        groups: dict[str, list[int]] = {}
        j = 0
        for name, kind in self.columns:
            if kind == "target":
                continue
            width = len(self.onehot[name]) if name in self.onehot else 1
            groups[name] = list(range(j, j + width))
            j += width
        return groups

    def to_dict(self) -> dict[str, Any]:
        return {
            "format_version": self.FORMAT_VERSION,
            "task": self.task,
            "target": self.target,
            "columns": [list(c) for c in self.columns],
            "numeric": {k: list(v) for k, v in self.numeric.items()},
            "constant": list(self.constant),
            "onehot": self.onehot,
            "target_encoding": self.target_encoding,
            "global_mean": self.global_mean,
            "shrinkage": self.shrinkage,
            "classes": self.classes,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PreprocessorState":
        if d.get("format_version") != cls.FORMAT_VERSION:
            raise ValueError(f"unsupported preprocessor format {d.get('format_version')!r}")
        return cls(
            task=d["task"],
            target=d["target"],
            columns=[tuple(c) for c in d["columns"]],
            numeric={k: (float(v[0]), float(v[1])) for k, v in d["numeric"].items()},
            constant=list(d["constant"]),
            onehot={k: list(v) for k, v in d["onehot"].items()},
            target_encoding={k: dict(v) for k, v in d["target_encoding"].items()},
            global_mean=float(d["global_mean"]),
            shrinkage=float(d["shrinkage"]),
            classes=list(d["classes"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _category(cell: str | None) -> str:
    return MISSING_CATEGORY if cell is None else cell


def _sort_labels(labels: set[str]) -> list[str]:
    try:
        return sorted(labels, key=float)
    except ValueError:
        return sorted(labels)


def fit_preprocessor(
    table: RawTable, split_indices: Sequence[int], task: str, shrinkage: float = 10.0
) -> PreprocessorState:
    """Fit standardization and categorical encodings on the training rows only.

    Categorical columns get target encoding for binary tasks and one-hot
    encoding otherwise. Target encoding of category ``c`` is
    ``(n_c * mean_c + s * mean_global) / (n_c + s)``.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if shrinkage <= 0:
        raise ValueError("shrinkage must be positive")
    idx = sorted(set(int(i) for i in split_indices))
    if not idx:
        raise ValueError("cannot fit a preprocessor on zero training rows")
    rows = [table.rows[i] for i in idx]
    t = table.target_index
    target_name = table.columns[t][0]
    if any(row[t] is None for row in rows):
        raise ValueError("target column has missing values in the training rows")

    state = PreprocessorState(task=task, target=target_name, columns=list(table.columns), shrinkage=shrinkage)
    if task == "regression":
        try:
            y = np.array([float(row[t]) for row in rows])
        except ValueError as exc:
            raise ValueError(f"regression target is not numeric: {exc}") from None
    else:
        state.classes = _sort_labels({row[t] for row in rows})
        if task == "binary" and len(state.classes) != 2:
            raise ValueError(f"binary task needs exactly 2 target labels, found {len(state.classes)}")
        lookup = {c: k for k, c in enumerate(state.classes)}
        y = np.array([lookup[row[t]] for row in rows], dtype=np.float64)
    state.global_mean = float(y.mean())

    for j, (name, kind) in enumerate(table.columns):
        if kind == "numeric":
            cells = [row[j] for row in rows if row[j] is not None]
            values = np.array([float(c) for c in cells]) if cells else np.zeros(1)
            mean, std = float(values.mean()), float(values.std())
            if std == 0.0:
                std = 1.0
                state.constant.append(name)
            state.numeric[name] = (mean, std)
        elif kind == "categorical":
            cats = [_category(row[j]) for row in rows]
            if task == "binary":
                sums: dict[str, float] = {}
                counts: dict[str, int] = {}
                for cat, target in zip(cats, y):
                    sums[cat] = sums.get(cat, 0.0) + target
                    counts[cat] = counts.get(cat, 0) + 1
                counts.setdefault(MISSING_CATEGORY, 0)
                sums.setdefault(MISSING_CATEGORY, 0.0)
                state.target_encoding[name] = {
                    cat: (sums[cat] + shrinkage * state.global_mean) / (counts[cat] + shrinkage)
                    for cat in sorted(counts)
                }
            else:
                state.onehot[name] = sorted(set(cats) | {MISSING_CATEGORY})
    return state


def transform(table: RawTable, state: PreprocessorState) -> Dataset:
    if [name for name, _ in table.columns] != [name for name, _ in state.columns]:
        raise SchemaError("table columns do not match the fitted preprocessor")
    n = table.n_rows
    blocks = []
    for j, (name, kind) in enumerate(state.columns):
        cells = [row[j] for row in table.rows]
        if kind == "numeric":
            mean, std = state.numeric[name]
            col = np.array([0.0 if c is None else (float(c) - mean) / std for c in cells])
            blocks.append(col[:, None])
        elif kind == "categorical" and name in state.target_encoding:
            enc = state.target_encoding[name]
            col = np.array([enc.get(_category(c), state.global_mean) for c in cells])
            blocks.append(col[:, None])
        elif kind == "categorical":
            cats = state.onehot[name]
            pos = {cat: k for k, cat in enumerate(cats)}
            missing = pos[MISSING_CATEGORY]
            block = np.zeros((n, len(cats)))
            # unseen categories share the missing indicator
            block[np.arange(n), [pos.get(_category(c), missing) for c in cells]] = 1.0
            blocks.append(block)
    X = np.hstack(blocks) if blocks else np.zeros((n, 0))

    t = table.target_index
    labels = [row[t] for row in table.rows]
    if any(v is None for v in labels):
        raise ValueError("target column has missing values")
    if state.task == "regression":
        y = np.array([float(v) for v in labels])
    else:
        lookup = {c: k for k, c in enumerate(state.classes)}
        unseen = sorted({v for v in labels if v not in lookup})
        if unseen:
            raise ValueError(f"target labels {unseen} were not seen at fit time")
        y = np.array([lookup[v] for v in labels], dtype=np.int64)
    return Dataset(X, y, state.feature_names, state.n_classes, state.task)


def gen_half_moons(n: int, noise_std: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaving semicircles, ``n // 2`` points per class.

    Class 0 lies on ``(cos t, sin t)``, class 1 on ``(1 - cos t, 0.5 - sin t)``
    with ``t ~ U[0, pi]``. Rows are shuffled.
    """
    if n < 2 or n % 2:
        raise ValueError("n must be an even count >= 2")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    rng = np.random.default_rng(seed)
    half = n // 2
    t_upper = rng.uniform(0.0, np.pi, half)
    t_lower = rng.uniform(0.0, np.pi, half)
    upper = np.column_stack([np.cos(t_upper), np.sin(t_upper)])
    lower = np.column_stack([1.0 - np.cos(t_lower), 0.5 - np.sin(t_lower)])
    X = np.vstack([upper, lower])
    y = np.repeat([0, 1], half)
    if noise_std > 0:
        X = X + rng.normal(0.0, noise_std, X.shape)
    order = rng.permutation(n)
    return Dataset(X[order], y[order], ["x1", "x2"], 2, "binary")


@dataclass
class XaiDatasetSpec:
    """Gaussian features with equicorrelation ``rho`` and a known labelling rule.

    Generator parameters left as ``None`` are drawn from ``seed``.
    """

    kind: str = "gaussian-linear"
    n_features: int = 5
    n_train: int = 500
    n_val: int = 50
    rho: float = 0.0
    seed: int = 0
    weights: Sequence[float] | None = None
    nonlinearities: Sequence[str] | None = None
    thresholds: Sequence[float] | None = None
    shapley_cap: int = 15

    def __post_init__(self):
        if self.kind not in XAI_KINDS:
            raise ValueError(f"unknown XAI dataset kind {self.kind!r}")
        if self.n_features < 1 or self.n_train < 1 or self.n_val < 0:
            raise ValueError("feature and row counts must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")

    @property
    def val_fraction(self) -> float:
        return self.n_val / (self.n_train + self.n_val)

    def resolved(self) -> dict[str, np.ndarray | list[str]]:
        """Generator parameters, drawn from a stream separate from the samples."""
        rng = np.random.default_rng([self.seed, 0xA11])
        M = self.n_features
        signs = rng.choice([-1.0, 1.0], M)
        magnitudes = rng.uniform(0.2, 2.0, M)
        picks = rng.integers(0, len(NONLINEARITIES), M)
        thresholds = rng.uniform(-0.5, 0.5, M)
        out = {
            "weights": np.asarray(self.weights if self.weights is not None else signs * magnitudes, dtype=float),
            "nonlinearities": list(self.nonlinearities) if self.nonlinearities is not None
            else [NONLINEARITIES[k] for k in picks],
            "thresholds": np.asarray(self.thresholds if self.thresholds is not None else thresholds, dtype=float),
        }
        if len(out["weights"]) != M or len(out["nonlinearities"]) != M or len(out["thresholds"]) != M:
            raise ValueError("generator parameters must have one entry per feature")
        bad = [g for g in out["nonlinearities"] if g not in NONLINEARITIES]
        if bad:
            raise ValueError(f"unknown nonlinearities {bad}")
        return out

    def score_fn(self):
        """The generative logit ``x -> score``; labels are ``score > 0``."""
        params = self.resolved()
        w = params["weights"]
        if self.kind == "gaussian-linear":
            return lambda X: np.asarray(X) @ w
        if self.kind == "gaussian-nonlinear-additive":
            fns = {"sin": np.sin, "tanh": np.tanh, "square": np.square, "identity": lambda v: v}
            gs = [fns[g] for g in params["nonlinearities"]]
            return lambda X: sum(g(np.asarray(X)[..., m]) for m, g in enumerate(gs))
        t = params["thresholds"]
        return lambda X: np.sign(np.asarray(X) - t) @ w


def equicorrelation_cholesky(M: int, rho: float) -> np.ndarray:
    if M > 1 and rho <= -1.0 / (M - 1):
        raise ValueError("equicorrelation matrix is not positive definite")
    cov = np.full((M, M), rho)
    np.fill_diagonal(cov, 1.0)
    return np.linalg.cholesky(cov)


def gen_xai_dataset(spec: XaiDatasetSpec) -> tuple[Dataset, np.ndarray]:
    """Sample ``n_train + n_val`` rows and their ground-truth attributions.

    The ground truth is the exact Shapley value of the generative logit with
    the population mean (zero) as the removal baseline. For the linear kind
    this reduces to ``w_m * x_m``.
    """
    M = spec.n_features
    if spec.kind != "gaussian-linear" and M > spec.shapley_cap:
        raise ValueError(f"Shapley ground truth is capped at {spec.shapley_cap} features, got {M}")
    rng = np.random.default_rng([spec.seed, 0xDA7A])
    N = spec.n_train + spec.n_val
    L = equicorrelation_cholesky(M, spec.rho)
    X = rng.standard_normal((N, M)) @ L.T
    score = spec.score_fn()
    s = score(X)
    y = (1.0 / (1.0 + np.exp(-s)) > 0.5).astype(np.int64)
    if spec.kind == "gaussian-linear":
        truth = X * spec.resolved()["weights"]
    else:
        from .metrics import shapley_values

        truth = shapley_values(score, X, np.zeros(M), m_max=spec.shapley_cap)
    names = [f"x{m + 1}" for m in range(M)]
    return Dataset(X, y, names, 2, "binary"), truth


def split_indices(
    y: np.ndarray, val_fraction: float, seed: int = 0, stratified: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must lie in (0, 1)")
    y = np.asarray(y)
    n = len(y)
    rng = np.random.default_rng(seed)
    if not stratified:
        perm = rng.permutation(n)
        n_val = int(round(n * val_fraction))
        return np.sort(perm[n_val:]), np.sort(perm[:n_val])
    val = []
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        if len(members) < 2:
            raise ValueError(f"class {c} has fewer than 2 instances; cannot stratify")
        members = members[rng.permutation(len(members))]
        val.append(members[: int(round(len(members) * val_fraction))])
    val_idx = np.sort(np.concatenate(val))
    train_idx = np.setdiff1d(np.arange(n), val_idx)
    return train_idx, val_idx


def split(
    dataset: Dataset, val_fraction: float, seed: int = 0, stratified: bool = False
) -> tuple[Dataset, Dataset]:
    train_idx, val_idx = split_indices(dataset.y, val_fraction, seed, stratified)
    return dataset.subset(train_idx), dataset.subset(val_idx)


def dataset_to_csv(dataset: Dataset, path: str | Path, target: str = "label") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(dataset.feature_names) + [target])
        for row, label in zip(dataset.X, dataset.y):
            writer.writerow([repr(float(v)) for v in row] + [str(label)])
