import importlib

import numpy as np
import pandas as pd
import pytest

from crossmae.errors import ConfigError
from crossmae.phenotyping.evaluate import (
    SEARCH_SPACES,
    comparison_table,
    encode_target,
    evaluate,
    evaluate_table,
    pearson_r2,
    summarize_report,
)
from crossmae.phenotyping.features import feature_columns

ev = importlib.import_module("crossmae.phenotyping.evaluate")


def test_pearson_r2_matches_covariance_formula():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.normal(size=(2, 30))
        b = a + rng.normal(size=30)
        cov = ((a - a.mean()) * (b - b.mean())).mean()
        expected = cov**2 / (a.var() * b.var())
        assert abs(pearson_r2(a, b) - expected) < 1e-12
    assert pearson_r2([1, 2, 3], [5, 5, 5]) == 0.0


def test_search_spaces():
    assert set(SEARCH_SPACES["yield_regression"]) == {"linear", "pls", "svm", "lasso", "gboost", "xgboost"}
    assert set(SEARCH_SPACES["nitrogen_classification"]) == {"logistic", "svm", "gboost", "xgboost"}
    xgb = SEARCH_SPACES["yield_regression"]["xgboost"]
    assert (xgb["n_estimators"].low, xgb["n_estimators"].high) == (50, 300)
    assert (xgb["max_depth"].low, xgb["max_depth"].high) == (3, 12)
    assert SEARCH_SPACES["nitrogen_classification"]["svm"]["kernel"].choices == ("rbf", "linear")


def test_encode_target():
    assert encode_target("nitrogen_classification", ["low", "high", "medium"]).tolist() == [0, 2, 1]


def _linear_dataset(g=4, m=5, seed=0):
    rng = np.random.default_rng(seed)
    genotypes = np.repeat(np.arange(g), m)
    X = rng.normal(size=(g * m, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + 3.0
    return X, y, genotypes


def test_perfect_linear_signal():
    X, y, genotypes = _linear_dataset()
    res = evaluate(X, y, genotypes, "yield_regression", "linear")
    assert res.mean >= 0.999
    assert res.fold_status == ["ok"] * 5


def test_scaler_sees_training_rows_only(monkeypatch):
    fitted = []

    class Recording(ev.StandardScaler):
        def fit(self, X, y=None, sample_weight=None):
            fitted.append(np.asarray(X)[:, 0].copy())
            return super().fit(X, y, sample_weight)

    monkeypatch.setattr(ev, "StandardScaler", Recording)
    X, y, genotypes = _linear_dataset()
    X[:, 0] = np.arange(len(X))  # row id
    res = evaluate(X, y, genotypes, "yield_regression", "lasso", n_candidates=2)
    splits = ev.build_cv(genotypes, seed=0)
    assert fitted
    for ids in fitted:
        # every scaler fit lies inside the training rows of some outer fold
        assert any(set(ids.astype(int)) <= set(s.train_idx) for s in splits)
    assert len(res.fold_metrics) == 5


def test_failed_fold_is_reported(monkeypatch):
    class Broken:
        def get_params(self, deep=True):
            return {}

        def set_params(self, **kw):
            return self

        def fit(self, X, y):
            raise RuntimeError("boom")

    monkeypatch.setattr(ev, "_estimator", lambda *a: Broken())
    X, y, genotypes = _linear_dataset()
    res = evaluate(X, y, genotypes, "yield_regression", "linear")
    assert res.failed and np.isnan(res.mean)


def test_unknown_family():
    X, y, genotypes = _linear_dataset()
    with pytest.raises(ConfigError):
        evaluate(X, y, genotypes, "nitrogen_classification", "lasso")
    with pytest.raises(ConfigError):
        evaluate(X, y, genotypes, "clustering", "linear")


def test_search_is_seeded():
    X, y, genotypes = _linear_dataset()
    y = y + np.random.default_rng(1).normal(size=y.size)
    a = evaluate(X, y, genotypes, "yield_regression", "svm", n_candidates=3, seed=2)
    b = evaluate(X, y, genotypes, "yield_regression", "svm", n_candidates=3, seed=2)
    assert a.fold_metrics == b.fold_metrics and a.fold_params == b.fold_params


def test_report_tables(pairs):
    from crossmae.phenotyping.features import feature_table

    tables = {s: feature_table(pairs, s) for s in ("sat_rgb", "uav_rgb")}
    per_fold = evaluate_table(tables, "nitrogen_classification", "logistic", n_candidates=2)
    assert set(per_fold["modality_set"]) == {"sat_rgb", "uav_rgb"}
    summary = summarize_report(per_fold)
    assert len(summary) == 2
    table = comparison_table(summary)
    assert table.shape == (1, 2)
    assert all("±" in c for c in table.to_numpy().ravel())
    cols = feature_columns("sat_rgb")
    assert len(cols) == 20


def test_std_is_population():
    df = pd.DataFrame(
        {
            "task": "t",
            "timepoint": 0,
            "modality_set": "s",
            "model": "m",
            "metric": "r2",
            "value": [0.0, 1.0],
            "status": "ok",
        }
    )
    assert summarize_report(df)["std"].iloc[0] == 0.5
