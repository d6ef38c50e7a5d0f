"""Yield regression and nitrogen classification under genotype-grouped CV.

Each outer fold standardizes features on its training rows, tunes the model
with a randomized search (inner 3-fold CV on the training rows only) and
scores the refit model on the held-out replicates.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import stats
from sklearn.base import clone
from sklearn.cross_decomposition import PLSRegression
from sklearn.ensemble import GradientBoostingClassifier, GradientBoostingRegressor
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import Lasso, LinearRegression, LogisticRegression
from sklearn.metrics import accuracy_score, make_scorer
from sklearn.model_selection import KFold, RandomizedSearchCV
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.svm import SVC, SVR

from ..datagen import NITROGEN_LEVELS
from ..errors import ConfigError
from ..rng import int_seed
from .cv import build_cv

logger = logging.getLogger(__name__)

TASKS = ("yield_regression", "nitrogen_classification")
N_CANDIDATES = 25
INNER_FOLDS = 3


@dataclass(frozen=True)
class Param:
    """One hyperparameter: ``int``/``float`` uniform on [low, high], or ``choice``."""

    kind: str
    low: float | None = None
    high: float | None = None
    choices: tuple = ()

    def distribution(self, int_cap: int | None = None):
        if self.kind == "float":
            return stats.uniform(self.low, self.high - self.low)
        if self.kind == "int":
            high = int(self.high) if int_cap is None else min(int(self.high), int_cap)
            return stats.randint(int(self.low), max(high, int(self.low)) + 1)
        return list(self.choices)


_GBOOST = {
    "n_estimators": Param("int", 50, 200),
    "learning_rate": Param("float", 0.01, 0.3),
    "max_depth": Param("int", 3, 10),
}
_XGBOOST = {
    "n_estimators": Param("int", 50, 300),
    "learning_rate": Param("float", 0.01, 0.3),
    "max_depth": Param("int", 3, 12),
    "subsample": Param("float", 0.5, 1.0),
    "colsample_bytree": Param("float", 0.5, 1.0),
}

# SVM "scale" width is 1 / (F * Var(X)), "auto" is 1 / F.
SEARCH_SPACES: dict[str, dict[str, dict[str, Param]]] = {
    "yield_regression": {
        "linear": {},
        "pls": {"n_components": Param("int", 1, 10)},
        "svm": {"C": Param("float", 0.1, 10.0), "gamma": Param("choice", choices=("scale", "auto"))},
        "lasso": {"alpha": Param("float", 1e-4, 1.0)},
        "gboost": _GBOOST,
        "xgboost": _XGBOOST,
    },
    "nitrogen_classification": {
        "logistic": {"C": Param("float", 0.01, 10.0)},
        "svm": {
            "C": Param("float", 0.1, 10.0),
            "gamma": Param("choice", choices=("scale", "auto")),
            "kernel": Param("choice", choices=("rbf", "linear")),
        },
        "gboost": _GBOOST,
        "xgboost": _XGBOOST,
    },
}


def _estimator(task: str, family: str, seed: int):
    if task == "yield_regression":
        if family == "linear":
            return LinearRegression()
        if family == "pls":
            return PLSRegression(scale=False)
        if family == "svm":
            return SVR()
        if family == "lasso":
            return Lasso(max_iter=10_000, random_state=seed)
        if family == "gboost":
            return GradientBoostingRegressor(random_state=seed)
        if family == "xgboost":
            from xgboost import XGBRegressor

            return XGBRegressor(random_state=seed, n_jobs=1, verbosity=0)
    else:
        if family == "logistic":
            return LogisticRegression(penalty="l2", solver="lbfgs", max_iter=2000)
        if family == "svm":
            return SVC(random_state=seed)
        if family == "gboost":
            return GradientBoostingClassifier(random_state=seed)
        if family == "xgboost":
            from xgboost import XGBClassifier

            return XGBClassifier(random_state=seed, n_jobs=1, verbosity=0)
    raise ConfigError(f"model family {family!r} is not available for {task}")


def pearson_r2(y_true, y_pred) -> float:
    """Squared Pearson correlation; 0 when either side is constant."""
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.size < 2 or y_true.std() == 0 or y_pred.std() == 0:
        return 0.0
    r = np.corrcoef(y_true, y_pred)[0, 1]
    return float(r * r)


def _score(task: str, y_true, y_pred) -> float:
    if task == "yield_regression":
        return pearson_r2(y_true, y_pred)
    return float(accuracy_score(y_true, np.asarray(y_pred).ravel()))


@dataclass
class EvalResult:
    task: str
    family: str
    fold_metrics: list[float]
    fold_params: list[dict]
    fold_status: list[str]
    metric_name: str
    extra: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        ok = [m for m in self.fold_metrics if np.isfinite(m)]
        return float(np.mean(ok)) if ok else float("nan")

    @property
    def std(self) -> float:
        ok = [m for m in self.fold_metrics if np.isfinite(m)]
        return float(np.std(ok)) if ok else float("nan")

    @property
    def failed(self) -> bool:
        return all(s == "failed" for s in self.fold_status)

    def rows(self, **labels) -> list[dict]:
        return [
            {
                **labels,
                "task": self.task,
                "model": self.family,
                "fold": i,
                "metric": self.metric_name,
                "value": v,
                "status": s,
                "params": repr(p),
            }
            for i, (v, p, s) in enumerate(zip(self.fold_metrics, self.fold_params, self.fold_status))
        ]


def encode_target(task: str, values) -> np.ndarray:
    if task == "yield_regression":
        return np.asarray(values, dtype=np.float64)
    return np.array([NITROGEN_LEVELS.index(v) if isinstance(v, str) else int(v) for v in values])


def evaluate(
    X,
    y,
    genotypes: Sequence,
    task: str,
    family: str,
    *,
    seed: int = 0,
    keys: Sequence | None = None,
    n_candidates: int = N_CANDIDATES,
    n_folds: int = 5,
) -> EvalResult:
    """Outer genotype-grouped CV with an inner randomized hyperparameter search."""
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    space = SEARCH_SPACES[task].get(family)
    if space is None:
        raise ConfigError(f"model family {family!r} is not available for {task}")
    X = np.asarray(X, dtype=np.float64)
    y = encode_target(task, y)
    splits = build_cv(genotypes, n_folds=n_folds, seed=seed, keys=keys)

    metrics, params, status = [], [], []
    for split in splits:
        fold_seed = int_seed(seed, "search", split.fold) % 2**31
        pipe = Pipeline([("scale", StandardScaler()), ("model", _estimator(task, family, fold_seed))])
        Xtr, ytr = X[split.train_idx], y[split.train_idx]
        Xte, yte = X[split.test_idx], y[split.test_idx]
        cap = min(X.shape[1], (len(ytr) * (INNER_FOLDS - 1)) // INNER_FOLDS)
        dists = {
            f"model__{k}": p.distribution(int_cap=cap if k == "n_components" else None) for k, p in space.items()
        }
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", ConvergenceWarning)
                if dists:
                    search = RandomizedSearchCV(
                        pipe,
                        dists,
                        n_iter=n_candidates,
                        scoring=make_scorer(pearson_r2) if task == "yield_regression" else "accuracy",
                        cv=KFold(INNER_FOLDS, shuffle=True, random_state=fold_seed),
                        random_state=fold_seed,
                        error_score=np.nan,
                    )
                    search.fit(Xtr, ytr)
                    fitted, best = search.best_estimator_, {
                        k.removeprefix("model__"): v for k, v in search.best_params_.items()
                    }
                else:
                    fitted, best = clone(pipe).fit(Xtr, ytr), {}
            metric = _score(task, yte, fitted.predict(Xte))
            converged = not any(issubclass(w.category, ConvergenceWarning) for w in caught)
            status.append("ok" if converged else "not_converged")
        except Exception as exc:  # a failed cell is reported, not raised
            logger.warning("%s/%s fold %d failed: %s", task, family, split.fold, exc)
            metric, best = float("nan"), {}
            status.append("failed")
        metrics.append(metric)
        params.append(best)
    return EvalResult(
        task=task,
        family=family,
        fold_metrics=metrics,
        fold_params=params,
        fold_status=status,
        metric_name="r2" if task == "yield_regression" else "accuracy",
        extra={"n_rows": int(sum(len(s.test_idx) for s in splits)), "n_folds": len(splits)},
    )


def target_column(task: str) -> str:
    return "yield_value" if task == "yield_regression" else "nitrogen_level"


def evaluate_table(
    tables: dict[str, pd.DataFrame],
    task: str,
    family: str,
    *,
    seed: int = 0,
    n_candidates: int = N_CANDIDATES,
    feature_cols: dict[str, list[str]] | None = None,
) -> pd.DataFrame:
    """Run :func:`evaluate` for every (modality set, timepoint); returns per-fold rows."""
    from .features import feature_columns

    rows = []
    for set_name, df in tables.items():
        cols = (feature_cols or {}).get(set_name) or feature_columns(set_name)
        for t, sub in df.groupby("timepoint_id", sort=True):
            sub = sub.dropna(subset=["yield_value"])
            res = evaluate(
                sub[cols].to_numpy(),
                sub[target_column(task)].to_numpy(),
                sub["genotype_id"].to_numpy(),
                task,
                family,
                seed=seed,
                keys=list(zip(sub["location_id"], sub["plot_id"], sub["subplot_id"])),
                n_candidates=n_candidates,
            )
            rows.extend(res.rows(modality_set=set_name, timepoint=int(t)))
    return pd.DataFrame(rows)


def summarize_report(per_fold: pd.DataFrame) -> pd.DataFrame:
    """Mean and std across folds per (task, timepoint, modality set, model)."""
    keys = ["task", "timepoint", "modality_set", "model", "metric"]
    g = per_fold.groupby(keys, sort=True)
    out = g["value"].agg(["mean", "std", "count"]).reset_index()
    # population std across folds
    out["std"] = g["value"].agg(lambda v: float(np.nanstd(v))).to_numpy()
    out["failed_folds"] = g["status"].agg(lambda s: int((s == "failed").sum())).to_numpy()
    return out


def comparison_table(summary: pd.DataFrame) -> pd.DataFrame:
    """Task x timepoint rows, modality-set columns, ``mean ± std`` cells."""
    cell = summary.assign(
        cell=[f"{m:.2f} ± {s:.2f}" if np.isfinite(m) else "failed" for m, s in zip(summary["mean"], summary["std"])]
    )
    return cell.pivot_table(index=["task", "timepoint"], columns="modality_set", values="cell", aggfunc="first")
