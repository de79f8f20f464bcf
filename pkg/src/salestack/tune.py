"""Cross-validation, grid search, importance-guided feature selection and nested CV.

Every fit sees only its training rows: encodings are refitted inside each
fold, inner fold plans are drawn from training-part labels only, so
validation targets never reach an inner decision.
"""
import csv
import io
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from ._rng import child_seed
from .evalx import report, roc_auc
from .folds import FoldPlan, holdout_split, stratified_kfold
from .frame import TARGET

METRICS = ("accuracy", "macro_f1", "auc")

DEFAULT_GRIDS = {
    "boosted": {"max_depth": [3, 6, 9], "lam": [0.1, 1.0, 10.0]},
    "forest": {"n_trees": [100, 300], "max_features": ["sqrt", "third"]},
    "logistic": {"l2": [1e-4, 1e-2, 1.0]},
    "voting": {"mode": ["soft", "hard"]},
}


def score(metric, y_true, proba):
    if metric == "accuracy":
        return float(np.mean((proba >= 0.5).astype(np.int64) == y_true))
    if metric == "macro_f1":
        return report(y_true, (proba >= 0.5).astype(np.int64)).macro_f1
    if metric == "auc":
        return roc_auc(proba, y_true)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


@dataclass(frozen=True)
class CVScore:
    scores: tuple
    mean: float


def _fit_score(spec, train, test, metric, target):
    yt = np.asarray(train[target])
    if yt.min() == yt.max():
        raise ValueError("a training fold contains a single class")
    fitted = spec.fit(train, target)
    return score(metric, np.asarray(test[target]), fitted.predict_proba(test))


def cross_val_score(model_spec, frame, plan, metric="accuracy", target=TARGET):
    """Fit on each fold's complement and score on the fold; returns :class:`CVScore`."""
    if plan.n_rows != frame.n_rows:
        raise ValueError("fold plan does not match the frame")
    scores = tuple(_fit_score(model_spec, frame.take(tr), frame.take(te), metric, target)
                   for tr, te in plan.splits())
    return CVScore(scores, float(np.mean(scores)))


def expand_grid(grid):
    """Candidates in grid order: a dict of lists becomes its Cartesian product."""
    if isinstance(grid, dict):
        keys = list(grid)
        return [dict(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    return [dict(c) for c in grid]


@dataclass(frozen=True)
class GridResult:
    candidates: tuple  # (params, mean, per-fold scores)
    best: int

    @property
    def best_params(self):
        return self.candidates[self.best][0]

    @property
    def best_score(self):
        return self.candidates[self.best][1]


def grid_search(model_spec, grid, frame, inner_k=5, seed=0, metric="accuracy", target=TARGET,
                plan=None):
    """Exhaustive search; the first candidate in grid order wins ties."""
    cands = expand_grid(grid)
    if not cands:
        raise ValueError("empty grid")
    if plan is None:
        plan = stratified_kfold(frame[target], inner_k, child_seed(seed, "inner"))
    results = []
    for c in cands:
        spec = model_spec.with_(params={**model_spec.params, **c})
        cv = cross_val_score(spec, frame, plan, metric, target)
        results.append((c, cv.mean, cv.scores))
    best = 0
    for i, (_, m, _) in enumerate(results):
        if m > results[best][1]:
            best = i
    return GridResult(tuple(results), best)


@dataclass(frozen=True)
class SelectionResult:
    features: tuple
    score: float
    path: tuple  # (features, score) visited, largest subset first


def select_features_by_importance(model_spec, frame, inner_k=5, seed=0, metric="accuracy",
                                  target=TARGET, min_features=1, plan=None):
    """Backward elimination guided by the model's own importance ranking.

    Starting from all features, score the subset by inner CV, refit on the
    whole frame to rank features, and drop the least important (the later
    one on ties). The best-scoring subset wins; ties favour the smaller one.
    """
    feats = list(model_spec.features)
    if len(feats) < 2:
        raise ValueError("feature selection needs at least two features")
    if plan is None:
        plan = stratified_kfold(frame[target], inner_k, child_seed(seed, "select"))
    path = []
    while True:
        spec = model_spec.with_(features=tuple(feats))
        cv = cross_val_score(spec, frame, plan, metric, target)
        path.append((tuple(feats), cv.mean))
        if len(feats) <= min_features:
            break
        imp = np.asarray(spec.fit(frame, target).importances())
        # least important; among equals the last in order
        drop = len(feats) - 1 - int(np.argmin(imp[::-1]))
        feats.pop(drop)
    best = 0
    for i, (_, s) in enumerate(path):
        if s >= path[best][1]:
            best = i
    return SelectionResult(path[best][0], path[best][1], tuple(path))


@dataclass(frozen=True)
class NestedResult:
    outer_scores: tuple
    params: tuple
    features: tuple
    grids: tuple
    mean: float

    def report_rows(self):
        """One row per (outer fold, candidate) for the CV report."""
        rows = []
        for j, g in enumerate(self.grids):
            for i, (c, m, s) in enumerate(g.candidates):
                rows.append({"outer_fold": j, "candidate": i,
                             "params": json.dumps(c, sort_keys=True),
                             "inner_mean": m,
                             "inner_scores": ";".join(repr(float(v)) for v in s),
                             "chosen": int(i == g.best),
                             "outer_score": self.outer_scores[j] if i == g.best else ""})
        return rows


def cv_report_csv(result):
    buf = io.StringIO()
    cols = ["outer_fold", "candidate", "params", "inner_mean", "inner_scores", "chosen",
            "outer_score"]
    w = csv.DictWriter(buf, cols, lineterminator="\n")
    w.writeheader()
    for r in result.report_rows():
        w.writerow(r)
    return buf.getvalue()


def nested_cv(model_spec, grid, frame, outer_k=10, inner_k=5, seed=0, metric="accuracy",
              select_features=True, target=TARGET, plan=None):
    """Outer k-fold estimate of a tuned pipeline.

    Per outer fold: grid search and (optionally) feature selection on the
    training part only, then refit with the winners and score the held-out fold.
    """
    y = frame[target]
    if plan is None:
        plan = stratified_kfold(y, outer_k, child_seed(seed, "outer"))
    scores, params, feats, grids = [], [], [], []
    for j, (tr, te) in enumerate(plan.splits()):
        train, test = frame.take(tr), frame.take(te)
        inner_seed = child_seed(seed, "outer-fold", j)
        g = grid_search(model_spec, grid, train, inner_k, inner_seed, metric, target)
        spec = model_spec.with_(params={**model_spec.params, **g.best_params})
        if select_features and len(spec.features) >= 2:
            sel = select_features_by_importance(spec, train, inner_k, inner_seed, metric, target)
            spec = spec.with_(features=sel.features)
        scores.append(_fit_score(spec, train, test, metric, target))
        params.append(g.best_params)
        feats.append(tuple(spec.features))
        grids.append(g)
    return NestedResult(tuple(scores), tuple(params), tuple(feats), tuple(grids),
                        float(np.mean(scores)))


__all__ = ["FoldPlan", "stratified_kfold", "holdout_split", "cross_val_score", "grid_search",
           "select_features_by_importance", "nested_cv", "cv_report_csv", "expand_grid",
           "GridResult", "NestedResult", "SelectionResult", "CVScore", "DEFAULT_GRIDS", "score"]
