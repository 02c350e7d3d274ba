"""Attribution quality metrics and the exact Shapley oracle.

Model functions here map a batch ``(K, M)`` to one score per row. Feature
removal means replacing a value with the baseline (the training mean, which is
zero after standardization).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

ModelFn = Callable[[np.ndarray], np.ndarray]
METRIC_NAMES = ("faithfulness", "monotonicity", "roar-monotonicity", "infidelity", "shapley-corr")


@dataclass(frozen=True)
class MetricReport:
    dataset: str
    rho: float
    explainer: str
    metric: str
    value: float
    n_instances: int
    seed: int

    def __post_init__(self):
        if self.metric not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.metric!r}")

    def dumps(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _baseline(baseline, M: int) -> np.ndarray:
    if baseline is None:
        return np.zeros(M)
    b = np.asarray(baseline, dtype=np.float64)
    if b.ndim == 2:
        b = b.mean(axis=0)
    if b.shape != (M,):
        raise ValueError(f"baseline must have {M} entries")
    return b


def _subset_masks(M: int) -> np.ndarray:
    codes = np.arange(2**M)
    return ((codes[:, None] >> np.arange(M)) & 1).astype(bool)


def shapley_values(f: ModelFn, X: np.ndarray, baseline=None, m_max: int = 15) -> np.ndarray:
    """Exact interventional Shapley values for every row of ``X`` by full subset enumeration.

    ``v(S)`` evaluates ``f`` with the features outside ``S`` set to the baseline
    (a vector, or a background matrix whose column means are used).
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    N, M = X.shape
    if M > m_max:
        raise ValueError(f"exact Shapley enumeration is capped at {m_max} features, got {M}")
    b = _baseline(baseline, M)
    masks = _subset_masks(M)
    sizes = masks.sum(axis=1)
    fact = [math.factorial(k) for k in range(M + 1)]
    out = np.empty((N, M))
    for n in range(N):
        points = np.where(masks, X[n], b)
        v = np.asarray(f(points), dtype=np.float64).reshape(-1)
        for m in range(M):
            without = np.flatnonzero(~masks[:, m])
            s = sizes[without]
            weights = np.array([fact[k] * fact[M - k - 1] for k in s], dtype=np.float64) / fact[M]
            out[n, m] = np.sum(weights * (v[without | (1 << m)] - v[without]))
    return out


def brute_force_shapley(f: ModelFn, x: np.ndarray, background=None, m_max: int = 15) -> np.ndarray:
    return shapley_values(f, np.asarray(x)[None, :], background, m_max)[0]


def _pearson_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Pearson correlation; NaN where either row has zero variance."""
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    na = np.sqrt(np.sum(a * a, axis=1))
    nb = np.sqrt(np.sum(b * b, axis=1))
    ok = (na > 1e-12) & (nb > 1e-12)
    out = np.full(len(a), np.nan)
    out[ok] = np.clip(np.sum(a[ok] * b[ok], axis=1) / (na[ok] * nb[ok]), -1.0, 1.0)
    return out


def _mean_skipping(scores: np.ndarray, what: str) -> float:
    if np.all(np.isnan(scores)):
        raise ValueError(f"{what}: every instance had a zero-variance vector")
    return float(np.nanmean(scores))


def removal_drops(f: ModelFn, X: np.ndarray, baseline=None) -> np.ndarray:
    """``f(x) - f(x with feature m at the baseline)`` for every row and feature."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    N, M = X.shape
    b = _baseline(baseline, M)
    base = np.asarray(f(X)).reshape(N)
    drops = np.empty((N, M))
    for m in range(M):
        Xm = X.copy()
        Xm[:, m] = b[m]
        drops[:, m] = base - np.asarray(f(Xm)).reshape(N)
    return drops


def faithfulness_scores(f: ModelFn, attributions: np.ndarray, X: np.ndarray, baseline=None) -> np.ndarray:
    return _pearson_rows(np.atleast_2d(attributions), removal_drops(f, X, baseline))


def faithfulness(f: ModelFn, attributions: np.ndarray, X: np.ndarray, baseline=None) -> float:
    """Mean per-instance correlation of attributions with single-feature removal drops."""
    return _mean_skipping(faithfulness_scores(f, attributions, X, baseline), "faithfulness")


def monotonicity(f: ModelFn, attribution: np.ndarray, x: np.ndarray, baseline=None) -> float:
    """Fraction of adjacent steps whose marginal gain does not shrink.

    Features are switched from the baseline to their value at ``x`` in
    increasing ``|attribution|`` order; gains are compared in absolute value.
    """
    x = np.asarray(x, dtype=np.float64)
    M = len(x)
    if M < 2:
        raise ValueError("monotonicity needs at least 2 features")
    b = _baseline(baseline, M)
    order = np.argsort(np.abs(np.asarray(attribution)), kind="stable")
    path = np.tile(b, (M + 1, 1))
    for k, m in enumerate(order):
        path[k + 1 :, m] = x[m]
    values = np.asarray(f(path)).reshape(M + 1)
    gains = np.abs(np.diff(values))
    return float(np.mean(gains[1:] >= gains[:-1]))


def mean_monotonicity(f: ModelFn, attributions: np.ndarray, X: np.ndarray, baseline=None) -> float:
    return float(np.mean([monotonicity(f, a, x, baseline) for a, x in zip(attributions, X)]))


def infidelity(
    f: ModelFn, attribution: np.ndarray, x: np.ndarray, sigma: float = 0.1, n_perturb: int = 1000, seed: int = 0
) -> float:
    """``E[(I . a - (f(x) - f(x - I)))^2]`` with ``I ~ N(0, sigma^2 Id)``."""
    if sigma <= 0 or n_perturb < 1:
        raise ValueError("sigma must be positive and n_perturb >= 1")
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    pert = rng.normal(0.0, sigma, (n_perturb, len(x)))
    fx = np.asarray(f(x[None, :])).reshape(())
    actual = fx - np.asarray(f(x[None, :] - pert)).reshape(n_perturb)
    return float(np.mean((pert @ np.asarray(attribution, dtype=np.float64) - actual) ** 2))


def mean_infidelity(
    f: ModelFn, attributions: np.ndarray, X: np.ndarray, sigma: float = 0.1, n_perturb: int = 1000, seed: int = 0
) -> float:
    return float(
        np.mean([infidelity(f, a, x, sigma, n_perturb, seed + n) for n, (a, x) in enumerate(zip(attributions, X))])
    )


def shapley_corr(attributions: np.ndarray, oracle: np.ndarray) -> float:
    attributions, oracle = np.atleast_2d(attributions), np.atleast_2d(oracle)
    if attributions.shape != oracle.shape:
        raise ValueError("explainer and oracle outputs must have the same shape")
    if len(attributions) < 2:
        raise ValueError("shapley_corr needs at least 2 instances")
    return _mean_skipping(_pearson_rows(attributions, oracle), "shapley_corr")


def random_explainer(M: int, seed: int = 0) -> np.ndarray:
    if M < 1:
        raise ValueError("M must be >= 1")
    return np.random.default_rng(seed).standard_normal(M)


def random_attributions(N: int, M: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((N, M))


def roar_score(curve: Sequence[tuple[float, float]]) -> float:
    """Fraction of adjacent removal fractions where accuracy does not increase."""
    acc = np.array([a for _, a in curve])
    if len(acc) < 2:
        raise ValueError("ROAR curve needs at least two points")
    return float(np.mean(acc[1:] <= acc[:-1]))


def retrain_accuracy(train_set, val_set, removed: Sequence[int], train_cfg, net_overrides=None) -> float:
    """Validation accuracy of a fresh IMN trained with ``removed`` features zeroed everywhere."""
    from .train import net_config_for, train

    tr, va = train_set.with_zeroed(removed), val_set.with_zeroed(removed)
    ens = train(tr, train_cfg, net_config_for(tr, **(net_overrides or {})))
    return float(np.mean(ens.predict(va.X) == va.y))


def roar_monotonicity(
    train_set, val_set, ranking: Sequence[int], train_cfg, fractions: Sequence[float], net_overrides=None
) -> list[tuple[float, float]]:
    """Remove-and-retrain: zero the top ``round(fraction * M)`` ranked features and retrain.

    Returns ``(fraction, validation accuracy)`` sorted by fraction.
    """
    M = train_set.n_features
    out = []
    for frac in sorted(fractions):
        if not 0.0 <= frac < 1.0:
            raise ValueError("fractions must lie in [0, 1)")
        k = int(round(frac * M))
        if k >= M:
            raise ValueError(f"fraction {frac} removes all {M} features")
        out.append((float(frac), retrain_accuracy(train_set, val_set, list(ranking[:k]), train_cfg, net_overrides)))
    return out
