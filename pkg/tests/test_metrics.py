import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imn.data import Dataset, XaiDatasetSpec, gen_xai_dataset, split_indices
from imn.metrics import (
    MetricReport,
    brute_force_shapley,
    faithfulness,
    infidelity,
    mean_infidelity,
    mean_monotonicity,
    monotonicity,
    random_attributions,
    random_explainer,
    removal_drops,
    retrain_accuracy,
    roar_monotonicity,
    roar_score,
    shapley_corr,
    shapley_values,
)
from imn.train import TrainConfig


def permutation_shapley(f, x, b):
    """Average marginal contribution over all M! orderings."""
    M = len(x)
    phi = np.zeros(M)
    perms = list(itertools.permutations(range(M)))
    for perm in perms:
        point = b.copy()
        prev = f(point[None])[0]
        for m in perm:
            point[m] = x[m]
            cur = f(point[None])[0]
            phi[m] += cur - prev
            prev = cur
    return phi / len(perms)


def nonlinear(Z):
    return np.tanh(Z[:, 0] * Z[:, 1]) + Z[:, 2] ** 2 - np.sin(Z[:, 3]) * Z[:, 0]


def test_shapley_linear_game_exact():
    w = np.array([0.5, -1.0, 2.0, 0.0, 3.0])
    X = np.random.default_rng(0).normal(size=(20, 5))
    phi = shapley_values(lambda Z: Z @ w + 1.0, X)
    np.testing.assert_allclose(phi, X * w, atol=1e-9)


def test_shapley_matches_permutation_oracle():
    rng = np.random.default_rng(1)
    b = rng.normal(size=4)
    for x in rng.normal(size=(5, 4)):
        np.testing.assert_allclose(brute_force_shapley(nonlinear, x, b), permutation_shapley(nonlinear, x, b), atol=1e-12)


def test_shapley_background_matrix_uses_column_means():
    bg = np.random.default_rng(2).normal(size=(50, 4))
    x = np.ones(4)
    np.testing.assert_array_equal(brute_force_shapley(nonlinear, x, bg), brute_force_shapley(nonlinear, x, bg.mean(axis=0)))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_shapley_efficiency(seed):
    rng = np.random.default_rng(seed)
    x, b = rng.normal(size=4), rng.normal(size=4)
    phi = brute_force_shapley(nonlinear, x, b)
    assert abs(phi.sum() - (nonlinear(x[None])[0] - nonlinear(b[None])[0])) <= 1e-9


def test_shapley_symmetry_and_dummy():
    f = lambda Z: np.exp(Z[:, 0] + Z[:, 1]) + 0.0 * Z[:, 2]  # noqa: E731
    phi = brute_force_shapley(f, np.array([0.7, 0.7, 5.0]))
    assert phi[0] == pytest.approx(phi[1], abs=1e-12)
    assert phi[2] == 0.0


def test_shapley_cap():
    with pytest.raises(ValueError):
        shapley_values(lambda Z: Z.sum(axis=1), np.zeros((1, 16)))


def test_faithfulness_self_and_negated():
    X = np.random.default_rng(3).normal(size=(30, 4))
    drops = removal_drops(nonlinear, X)
    assert faithfulness(nonlinear, drops, X) == pytest.approx(1.0)
    assert faithfulness(nonlinear, -drops, X) == pytest.approx(-1.0)


def test_faithfulness_skips_zero_variance_and_errors_when_all_skipped():
    X = np.ones((3, 2))
    with pytest.raises(ValueError):
        faithfulness(lambda Z: Z.sum(axis=1), np.ones((3, 2)), X)


def test_random_faithfulness_near_zero_on_gaussian_linear():
    ds, truth = gen_xai_dataset(XaiDatasetSpec("gaussian-linear", n_train=500, n_val=0, seed=0))
    w = XaiDatasetSpec("gaussian-linear", seed=0).resolved()["weights"]
    f = lambda Z: 1 / (1 + np.exp(-Z @ w))  # noqa: E731
    score = faithfulness(f, random_attributions(500, 5, seed=1), ds.X)
    assert abs(score) < 0.2
    assert faithfulness(f, truth, ds.X) > 0.9


def test_monotonicity_examples():
    w = np.array([1.0, -2.0, 3.0, 0.5])
    f = lambda Z: Z @ w  # noqa: E731
    x = np.array([1.0, 1.0, 1.0, 1.0])
    exact = np.abs(w * x)
    assert monotonicity(f, exact, x) == 1.0
    assert monotonicity(f, 1.0 / exact, x) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_monotonicity_two_features_is_binary(seed):
    rng = np.random.default_rng(seed)
    value = monotonicity(lambda Z: np.tanh(Z).sum(axis=1), rng.normal(size=2), rng.normal(size=2))
    assert value in (0.0, 1.0)


def test_monotonicity_in_unit_interval():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20, 4))
    assert 0.0 <= mean_monotonicity(nonlinear, rng.normal(size=(20, 4)), X) <= 1.0


def test_infidelity_examples():
    w = np.array([1.0, -2.0, 0.5])
    f = lambda Z: Z @ w  # noqa: E731
    x = np.array([0.3, 1.0, -1.0])
    assert infidelity(f, w, x) == pytest.approx(0.0, abs=1e-20)
    null = infidelity(f, np.zeros(3), x, sigma=0.1, n_perturb=20_000, seed=1)
    assert null == pytest.approx(0.01 * np.sum(w**2), rel=0.05)
    # overshooting by a factor of two leaves exactly the null explainer's error
    assert infidelity(f, 2 * w, x, seed=1) == pytest.approx(infidelity(f, np.zeros(3), x, seed=1), rel=1e-12)
    with pytest.raises(ValueError):
        infidelity(f, w, x, sigma=0.0)


def test_infidelity_deterministic_and_non_negative():
    X = np.random.default_rng(6).normal(size=(5, 4))
    a = np.random.default_rng(7).normal(size=(5, 4))
    v1, v2 = mean_infidelity(nonlinear, a, X, seed=3), mean_infidelity(nonlinear, a, X, seed=3)
    assert v1 == v2 and v1 >= 0


def test_shapley_corr_examples():
    rng = np.random.default_rng(8)
    oracle = rng.normal(size=(10, 5))
    assert shapley_corr(oracle, oracle) == pytest.approx(1.0)
    two = np.array([[1.0, 2.0], [2.0, 3.0]])
    flipped = two * [1.0, -1.0]
    np.testing.assert_allclose(shapley_corr(flipped, two), -1.0)
    with pytest.raises(ValueError):
        shapley_corr(oracle[:1], oracle[:1])
    with pytest.raises(ValueError):
        shapley_corr(oracle, oracle[:, :4])


def test_random_explainer():
    np.testing.assert_array_equal(random_explainer(5, 3), random_explainer(5, 3))
    assert random_explainer(7).shape == (7,)
    assert abs(random_attributions(100_000, 1, seed=2).mean()) < 0.02
    with pytest.raises(ValueError):
        random_explainer(0)


def test_roar_score():
    assert roar_score([(0.0, 0.9), (0.2, 0.8), (0.4, 0.8), (0.6, 0.85)]) == pytest.approx(2 / 3)


def test_metric_report_validation():
    rep = MetricReport("gaussian-linear", 0.0, "imn", "faithfulness", 0.8, 500, 0)
    assert json.loads(rep.dumps())["value"] == 0.8
    with pytest.raises(ValueError):
        MetricReport("d", 0.0, "imn", "accuracy", 0.1, 1, 0)


SHORT = TrainConfig(epochs=50, warmup_epochs=5, n_cycles=1, lambda_l1=0.0)


def _linear_split(seed, weights=None):
    spec = XaiDatasetSpec("gaussian-linear", n_train=500, n_val=100, seed=seed, weights=weights)
    ds, _ = gen_xai_dataset(spec)
    tr, va = split_indices(ds.y, spec.val_fraction, seed)
    return ds.subset(tr), ds.subset(va)


def test_roar_removing_all_features_rejected():
    tr, va = _linear_split(0)
    with pytest.raises(ValueError):
        roar_monotonicity(tr, va, [0, 1, 2, 3, 4], SHORT, [0.95])


def test_removing_everything_gives_majority_rate():
    tr, va = _linear_split(0)
    acc = retrain_accuracy(tr, va, [0, 1, 2, 3, 4], SHORT, {"hidden_width": 16})
    majority = max(np.mean(va.y == c) for c in (0, 1))
    assert acc == pytest.approx(majority)


def test_removing_dead_feature_changes_little():
    w = [1.5, -1.0, 0.8, 0.0, 0.0]
    deltas = []
    for seed in range(3):
        tr, va = _linear_split(seed, w)
        cfg = TrainConfig(**{**SHORT.__dict__, "seed": seed})
        curve = roar_monotonicity(tr, va, [3, 4, 0, 1, 2], cfg, [0.0, 0.4], {"hidden_width": 32, "seed": seed})
        deltas.append(curve[1][1] - curve[0][1])
    assert abs(np.mean(deltas)) <= 0.02


def test_top_feature_removal_hurts_more_than_bottom():
    spec = XaiDatasetSpec("gaussian-linear", seed=0)
    w = np.abs(spec.resolved()["weights"])
    top, bottom = int(np.argmax(w)), int(np.argmin(w))
    drops_top, drops_bottom = [], []
    for seed in range(3):
        tr, va = _linear_split(seed, spec.resolved()["weights"].tolist())
        cfg = TrainConfig(**{**SHORT.__dict__, "seed": seed})
        over = {"hidden_width": 32, "seed": seed}
        drops_top.append(retrain_accuracy(tr, va, [top], cfg, over))
        drops_bottom.append(retrain_accuracy(tr, va, [bottom], cfg, over))
    assert np.mean(drops_top) < np.mean(drops_bottom)


def test_with_zeroed_is_column_mask():
    ds = Dataset(np.ones((3, 3)), np.array([0, 1, 0]), list("abc"), 2)
    np.testing.assert_array_equal(ds.with_zeroed([1]).X[:, 1], 0.0)
    np.testing.assert_array_equal(ds.X[:, 1], 1.0)
