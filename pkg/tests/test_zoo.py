import json

import numpy as np
import pytest

from hybrid_ncl.zoo import (
    FAMILIES,
    SYNTH_KINDS,
    RegressionTree,
    RegressorSpec,
    build_prediction_matrix,
    default_specs,
    fit_predict,
    grid_search_cv,
    kfold_indices,
    load_dataset_csv,
    load_specs,
    split_indices,
    synth_dataset,
    synth_variance,
    write_dataset_csv,
)


def test_ols_exact(rng):
    X = rng.normal(size=(30, 3))
    y = X @ [1.0, -2.0, 0.5] + 4
    np.testing.assert_allclose(fit_predict("OLS", {}, X, y, X), y, atol=1e-8)


def test_knn_one_memorizes(rng):
    X = rng.normal(size=(25, 2))
    y = rng.normal(size=25)
    np.testing.assert_array_equal(fit_predict("KNN", {"k": 1}, X, y, X), y)


def test_deep_tree_memorizes(rng):
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    tree = RegressionTree(max_depth=None).fit(X, y)
    np.testing.assert_allclose(tree.predict(X), y, atol=1e-12)


@pytest.mark.parametrize("family", FAMILIES)
def test_every_family_runs(family, rng):
    X, y = synth_dataset("friedman1", 60, seed=1)
    spec = next(s for s in default_specs() if s.family == family)
    pred = fit_predict(spec, spec.grid_points()[0], X[:40], y[:40], X[40:])
    assert pred.shape == (20,) and np.all(np.isfinite(pred))


def test_ridge_shrinks(rng):
    X = rng.normal(size=(50, 3))
    y = X @ [3.0, 0.0, -3.0] + rng.normal(size=50)
    small = fit_predict("Ridge", {"alpha": 1e-6}, X, y, np.eye(3)) - fit_predict("Ridge", {"alpha": 1e-6}, X, y, np.zeros((1, 3)))
    big = fit_predict("Ridge", {"alpha": 1e4}, X, y, np.eye(3)) - fit_predict("Ridge", {"alpha": 1e4}, X, y, np.zeros((1, 3)))
    assert np.linalg.norm(big) < 0.1 * np.linalg.norm(small)


class TestGridSearch:
    def test_single_point(self, rng):
        X, y = synth_dataset("linear", 40, seed=2)
        res = grid_search_cv(RegressorSpec("KNN", {"k": [4]}), X, y)
        assert res.best_params == {"k": 4}
        assert res.per_fold_errors.shape == (5,)

    def test_finds_generating_model(self):
        X, y = synth_dataset("linear", 100, noise_sd=0.0, seed=3)
        res = grid_search_cv(RegressorSpec("Polynomial", {"degree": [3, 1, 2]}), X, y)
        assert res.best_params == {"degree": 1}
        assert res.mean_validation_error < 1e-8

    def test_order_invariance(self):
        X, y = synth_dataset("sinusoidal", 80, seed=4)
        a = grid_search_cv(RegressorSpec("KNN", {"k": [2, 5, 9]}), X, y)
        b = grid_search_cv(RegressorSpec("KNN", {"k": [9, 2, 5]}), X, y)
        assert a.best_params == b.best_params
        assert a.mean_validation_error == b.mean_validation_error

    def test_params_in_grid(self):
        X, y = synth_dataset("piecewise", 60, seed=5)
        for spec in default_specs():
            assert grid_search_cv(spec, X, y).best_params in spec.grid_points()

    def test_too_few_rows(self, rng):
        with pytest.raises(ValueError):
            grid_search_cv(RegressorSpec("OLS", {"fit_intercept": [True]}), rng.normal(size=(3, 2)), np.zeros(3))

    def test_folds_partition(self):
        folds = kfold_indices(23, 5, seed=1)
        assert sorted(np.concatenate(folds).tolist()) == list(range(23))


def test_prediction_matrix(rng):
    X, y = synth_dataset("friedman1", 120, seed=6)
    tr, va, te = split_indices(120, seed=6)
    val, test, cv = build_prediction_matrix(default_specs(), X[tr], y[tr], X[va], y[va], X[te], y[te])
    assert val.m == test.m == 6
    assert val.model_names == test.model_names == tuple(cv)
    for j, spec in enumerate(default_specs()):
        col = fit_predict(spec, cv[spec.label].best_params, X[tr], y[tr], X[va])
        np.testing.assert_array_equal(col, val.values[:, j])
    again = build_prediction_matrix(default_specs(), X[tr], y[tr], X[va], y[va], X[te], y[te])
    np.testing.assert_array_equal(again[1].values, test.values)


class TestSynthetic:
    def test_noiseless_linear(self):
        X, y = synth_dataset("linear", 200, noise_sd=0.0, seed=1)
        pred = fit_predict("OLS", {}, X[:100], y[:100], X[100:])
        np.testing.assert_allclose(pred, y[100:], atol=1e-8)

    @pytest.mark.parametrize("kind", SYNTH_KINDS)
    def test_deterministic(self, kind):
        a, b = synth_dataset(kind, 50, seed=9), synth_dataset(kind, 50, seed=9)
        assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()

    @pytest.mark.parametrize("kind", SYNTH_KINDS)
    def test_variance(self, kind):
        n = 20000
        _, y = synth_dataset(kind, n, noise_sd=0.5, seed=11)
        var = synth_variance(kind, 0.5)
        # sd of the sample variance is about var * sqrt(2 / n) for near-normal targets
        assert abs(y.var(ddof=1) - var) < 3 * var * np.sqrt(2.0 / (n - 1)) * 1.5

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            synth_dataset("cubic", 50)
        with pytest.raises(ValueError):
            synth_dataset("linear", 10)


def test_split_ratios():
    tr, va, te = split_indices(1000)
    assert (len(tr), len(va), len(te)) == (500, 100, 400)
    assert len(set(tr) | set(va) | set(te)) == 1000


def test_dataset_csv_ingestion(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,color,size,target\n1,red,S,2\n2,blue,M,3\n,red,L,4\n3,red,L,5\n", encoding="utf-8")
    X, y, names = load_dataset_csv(path, ordinal={"size": ["S", "M", "L"]})
    assert y.tolist() == [2.0, 3.0, 5.0]
    assert names == ["a", "size", "color_blue", "color_red"]
    np.testing.assert_array_equal(X, [[1, 0, 0, 1], [2, 1, 1, 0], [3, 2, 0, 1]])


def test_dataset_round_trip(tmp_path, rng):
    X, y = synth_dataset("linear", 30, seed=1)
    write_dataset_csv(X, y, tmp_path / "d.csv")
    X2, y2, _ = load_dataset_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(X, X2)
    np.testing.assert_array_equal(y, y2)


def test_load_specs(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps({"models": [{"family": "KNN", "grid": {"k": [1, 2]}, "name": "knn"}]}))
    (tmp_path / "m.toml").write_text('[[models]]\nfamily = "Ridge"\ngrid = { alpha = [0.5, 2.0] }\n')
    assert load_specs(tmp_path / "m.json")[0].label == "knn"
    assert load_specs(tmp_path / "m.toml")[0].grid_points() == [{"alpha": 0.5}, {"alpha": 2.0}]
    with pytest.raises(ValueError):
        RegressorSpec("SVM", {})
    with pytest.raises(ValueError):
        RegressorSpec("KNN", {"k": []})
