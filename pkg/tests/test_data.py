import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imn.baselines import train_logreg
from imn.data import (
    MISSING_CATEGORY,
    CSVParseError,
    Dataset,
    PreprocessorState,
    RawTable,
    SchemaError,
    XaiDatasetSpec,
    equicorrelation_cholesky,
    fit_preprocessor,
    gen_half_moons,
    gen_xai_dataset,
    load_csv,
    split,
    split_indices,
    transform,
)


@pytest.fixture
def small_csv(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text("a,b,label\n1.0,red,yes\n,blue,no\n3.0,red,yes\n")
    return path


SCHEMA = {"a": "numeric", "b": "categorical", "label": "target"}


def test_load_csv_roundtrip(small_csv):
    table = load_csv(small_csv, SCHEMA)
    assert table.n_rows == 3
    assert table.columns == [("a", "numeric"), ("b", "categorical"), ("label", "target")]
    assert table.rows[0] == ["1.0", "red", "yes"]


def test_load_csv_keeps_missing_cells(small_csv):
    table = load_csv(small_csv, SCHEMA)
    assert table.rows[1][0] is None


def test_load_csv_arity_error_names_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,label\n1,x,y\n2,x\n")
    with pytest.raises(CSVParseError) as err:
        load_csv(path, SCHEMA)
    assert err.value.row == 2
    assert "row 2" in str(err.value)


def test_load_csv_unknown_column(tmp_path):
    path = tmp_path / "extra.csv"
    path.write_text("a,b,c,label\n1,x,2,y\n")
    with pytest.raises(SchemaError):
        load_csv(path, SCHEMA)


def _table(rows, columns=(("a", "numeric"), ("b", "categorical"), ("label", "target"))):
    return RawTable(columns=list(columns), rows=[list(r) for r in rows])


def test_numeric_population_std():
    table = _table([["1", "x", "0"], ["2", "x", "1"], ["3", "y", "0"]])
    state = fit_preprocessor(table, [0, 1, 2], "binary")
    mean, std = state.numeric["a"]
    assert mean == 2.0
    assert std == pytest.approx(0.816496580927726, abs=1e-12)


def test_fit_uses_training_rows_only():
    table = _table([["1", "x", "0"], ["3", "x", "1"], ["100", "y", "0"]])
    state = fit_preprocessor(table, [0, 1], "binary")
    assert state.numeric["a"] == (2.0, 1.0)


def test_constant_feature_std_replaced_and_flagged():
    table = _table([["5", "x", "0"], ["5", "x", "1"]])
    state = fit_preprocessor(table, [0, 1], "binary")
    assert state.numeric["a"] == (5.0, 1.0)
    assert state.constant == ["a"]
    np.testing.assert_array_equal(transform(table, state).X[:, 0], [0.0, 0.0])


def test_zero_training_rows_rejected():
    with pytest.raises(ValueError):
        fit_preprocessor(_table([["1", "x", "0"]]), [], "binary")


def test_target_encoding_shrinkage_arithmetic():
    # category "hot" appears 10 times with target 1; 10 more rows of "cold" with target 0
    rows = [["0", "hot", "1"]] * 10 + [["0", "cold", "0"]] * 10
    state = fit_preprocessor(_table(rows), range(20), "binary", shrinkage=10.0)
    assert state.global_mean == 0.5
    assert state.target_encoding["b"]["hot"] == pytest.approx(0.75)
    assert state.target_encoding["b"]["cold"] == pytest.approx(0.25)


def test_unseen_category_encodes_to_global_mean():
    rows = [["0", "hot", "1"]] * 3 + [["0", "cold", "0"]]
    state = fit_preprocessor(_table(rows), range(4), "binary")
    ds = transform(_table([["0", "never-seen", "1"], ["0", None, "0"]]), state)
    np.testing.assert_allclose(ds.X[:, 1], [state.global_mean, state.global_mean])


def test_target_encoding_between_global_and_raw_mean():
    rng = np.random.default_rng(3)
    cats = rng.choice(list("abcde"), 200)
    labels = rng.integers(0, 2, 200)
    rows = [["0", c, str(t)] for c, t in zip(cats, labels)]
    state = fit_preprocessor(_table(rows), range(200), "binary", shrinkage=7.0)
    for c in "abcde":
        raw = labels[cats == c].mean()
        lo, hi = sorted([raw, state.global_mean])
        assert lo - 1e-12 <= state.target_encoding["b"][c] <= hi + 1e-12


def test_multiclass_uses_onehot():
    rows = [["1", "x", "a"], ["2", "y", "b"], ["3", "z", "c"]]
    state = fit_preprocessor(_table(rows), range(3), "multiclass")
    assert state.onehot["b"] == sorted(["x", "y", "z", MISSING_CATEGORY])
    ds = transform(_table(rows), state)
    assert ds.feature_names == ["a", f"b={MISSING_CATEGORY}", "b=x", "b=y", "b=z"]
    np.testing.assert_array_equal(ds.y, [0, 1, 2])


def test_transform_standardizes_and_imputes():
    rows = [["1", "x", "a"], ["3", "y", "b"], ["2", "z", "c"]]
    state = fit_preprocessor(_table(rows), range(3), "multiclass")
    state.numeric["a"] = (2.0, 1.0)
    ds = transform(_table([["2", "x", "a"], [None, "y", "b"]]), state)
    assert ds.X[0, 0] == 0.0
    assert ds.X[1, 0] == 0.0


def test_onehot_indicator_of_second_category():
    columns = (("b", "categorical"), ("label", "target"))
    rows = [["p", "a"], ["q", "b"], ["r", "c"]]
    state = fit_preprocessor(_table(rows, columns), range(3), "multiclass")
    state.onehot["b"] = ["p", "q", MISSING_CATEGORY]
    ds = transform(_table([["q", "a"]], columns), state)
    np.testing.assert_array_equal(ds.X[0], [0.0, 1.0, 0.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=40), st.integers(0, 2**16))
def test_standardized_training_columns_have_zero_mean_unit_std(values, seed):
    rng = np.random.default_rng(seed)
    cats = rng.choice(["u", "v", "w"], len(values))
    rows = [[repr(v), c, str(k % 3)] for k, (v, c) in enumerate(zip(values, cats))]
    table = _table(rows)
    state = fit_preprocessor(table, range(len(rows)), "multiclass")
    ds = transform(table, state)
    col = ds.X[:, 0]
    assert abs(col.mean()) < 1e-9
    if "a" not in state.constant:
        assert abs(col.std() - 1.0) < 1e-9
    # one-hot groups sum to exactly one per row
    np.testing.assert_array_equal(ds.X[:, 1:].sum(axis=1), np.ones(len(rows)))
    # refitting on transformed data is a no-op in distribution
    rows2 = [[repr(float(v)), c, r[2]] for v, c, r in zip(col, cats, rows)]
    state2 = fit_preprocessor(_table(rows2), range(len(rows)), "multiclass")
    mean2, std2 = state2.numeric["a"]
    assert abs(mean2) < 1e-9
    assert abs(std2 - 1.0) < 1e-9


def test_preprocessor_json_roundtrip(small_csv):
    table = load_csv(small_csv, SCHEMA)
    state = fit_preprocessor(table, [0, 1, 2], "binary")
    back = PreprocessorState.from_dict(json.loads(state.dumps()))
    assert back == state
    np.testing.assert_array_equal(transform(table, back).X, transform(table, state).X)


def test_half_moons_noiseless_points_on_arcs():
    ds = gen_half_moons(4, 0.0, seed=1)
    for x, label in zip(ds.X, ds.y):
        if label == 0:
            assert x[0] ** 2 + x[1] ** 2 == pytest.approx(1.0)
            assert x[1] >= 0
        else:
            assert (1 - x[0]) ** 2 + (0.5 - x[1]) ** 2 == pytest.approx(1.0)
            assert x[1] <= 0.5
    assert np.bincount(ds.y).tolist() == [2, 2]


def test_half_moons_deterministic():
    a, b = gen_half_moons(100, 0.1, seed=7), gen_half_moons(100, 0.1, seed=7)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)


def test_half_moons_not_linearly_separable():
    ds = gen_half_moons(400, 0.0, seed=0)
    model = train_logreg(ds, l2=0.0, lr=1.0, iters=5000)
    assert np.mean(model.predict(ds.X) == ds.y) < 1.0


def test_xai_linear_ground_truth_is_weight_times_value():
    spec = XaiDatasetSpec("gaussian-linear", n_features=2, n_train=10, n_val=0, weights=[1.0, 0.0])
    ds, truth = gen_xai_dataset(spec)
    np.testing.assert_array_equal(truth[:, 1], np.zeros(10))
    np.testing.assert_array_equal(truth[:, 0], ds.X[:, 0])
    x = np.array([[0.5, 2.0]])
    np.testing.assert_array_equal(x * spec.resolved()["weights"], [[0.5, 0.0]])


@pytest.mark.parametrize("rho", [0.0, 0.8])
def test_xai_sample_correlation(rho):
    spec = XaiDatasetSpec("gaussian-linear", n_features=2, n_train=10_000, n_val=0, rho=rho, seed=5)
    ds, _ = gen_xai_dataset(spec)
    corr = np.corrcoef(ds.X.T)[0, 1]
    assert abs(corr - rho) < 0.05


def test_equicorrelation_covariance_large_sample():
    L = equicorrelation_cholesky(4, 0.3)
    Z = np.random.default_rng(0).standard_normal((100_000, 4)) @ L.T
    target = np.full((4, 4), 0.3) + 0.7 * np.eye(4)
    assert np.max(np.abs(np.cov(Z.T) - target)) < 0.02


@pytest.mark.parametrize("kind", ["gaussian-nonlinear-additive", "gaussian-piecewise-constant"])
def test_xai_nonlinear_ground_truth_is_efficient(kind):
    spec = XaiDatasetSpec(kind, n_features=4, n_train=20, n_val=0, seed=2)
    ds, truth = gen_xai_dataset(spec)
    score = spec.score_fn()
    np.testing.assert_allclose(truth.sum(axis=1), score(ds.X) - score(np.zeros((1, 4))), atol=1e-9)


def test_xai_shapley_cap():
    with pytest.raises(ValueError):
        gen_xai_dataset(XaiDatasetSpec("gaussian-piecewise-constant", n_features=16, n_train=5, n_val=0))


def test_split_sizes_ten_to_one():
    ds = Dataset(np.arange(11.0)[:, None], np.zeros(11, dtype=int), ["a"], 2)
    tr, va = split(ds, 1 / 11, seed=0)
    assert (tr.n_rows, va.n_rows) == (10, 1)


def test_split_deterministic_disjoint_covering():
    y = np.random.default_rng(0).integers(0, 3, 97)
    a = split_indices(y, 0.3, seed=4, stratified=True)
    b = split_indices(y, 0.3, seed=4, stratified=True)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert not set(a[0]) & set(a[1])
    assert sorted(np.concatenate(a)) == list(range(97))


def test_stratified_split_balanced():
    y = np.repeat([0, 1], 50)
    _, val = split_indices(y, 0.2, seed=0, stratified=True)
    assert np.bincount(y[val]).tolist() == [10, 10]


def test_stratified_split_rejects_singleton_class():
    with pytest.raises(ValueError):
        split_indices(np.array([0, 0, 0, 1]), 0.5, stratified=True)
