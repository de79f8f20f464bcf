"""CART classification trees and random forests.

Splits maximise the Gini impurity decrease over midpoints between consecutive
distinct feature values. Equal-gain candidates resolve to the lowest feature
index, then the lowest threshold.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from ._grower import grow, presort
from ._rng import rng_for


def gini(counts):
    """Gini impurity ``1 - p0^2 - p1^2`` of a pair of class counts."""
    c0, c1 = (float(c) for c in counts)
    if c0 < 0 or c1 < 0:
        raise ValueError("class counts must be nonnegative")
    total = c0 + c1
    if total == 0:
        raise ValueError("gini is undefined for an empty node")
    p0, p1 = c0 / total, c1 / total
    return 1.0 - p0 * p0 - p1 * p1


def check_xy(X, y=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("X is empty")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    if y is None:
        return X
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return X, y.astype(np.float64)


def resolve_max_features(max_features, d):
    if max_features is None or max_features == "all":
        k = d
    elif max_features == "sqrt":
        k = math.ceil(math.sqrt(d))
    elif max_features == "third":
        k = max(1, d // 3)
    elif isinstance(max_features, float):
        k = max(1, int(round(max_features * d)))
    else:
        k = int(max_features)
    if not 1 <= k <= d:
        raise ValueError(f"max_features={max_features!r} resolves to {k}, outside [1, {d}]")
    return k


@dataclass
class TreeParams:
    max_depth: int | None = None
    min_samples_split: int = 2
    max_features: int | float | str | None = None


@dataclass
class ForestParams:
    n_trees: int = 200
    max_depth: int | None = None
    min_samples_split: int = 2
    max_features: int | float | str | None = "sqrt"
    bootstrap: bool = True

    def tree_params(self):
        return TreeParams(self.max_depth, self.min_samples_split, self.max_features)


@dataclass
class Tree:
    """Flat-array CART tree. Leaves have ``left == -1``.

    ``counts`` holds the (weighted) class-0 and class-1 totals of every node;
    ``gain`` the impurity decrease of internal nodes.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self):
        return int(self.feature.size)

    @property
    def n_leaves(self):
        return int((self.left < 0).sum())

    @property
    def probability(self):
        tot = self.counts.sum(axis=1)
        return np.divide(self.counts[:, 1], tot, out=np.zeros_like(tot), where=tot > 0)

    def apply(self, X):
        return _kernels.apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def predict_proba(self, X):
        X = check_xy(X)
        return self.probability[self.apply(X)]

    def to_dict(self):
        prob = self.probability

        def node(i):
            rec = {"counts": [float(self.counts[i, 0]), float(self.counts[i, 1])]}
            if self.left[i] < 0:
                rec["probability"] = float(prob[i])
                return rec
            rec.update(feature=int(self.feature[i]), threshold=float(self.threshold[i]),
                       gain=float(self.gain[i]), left=node(self.left[i]),
                       right=node(self.right[i]))
            return rec

        return node(0)

    @classmethod
    def from_dict(cls, rec):
        cols = {"feature": [], "threshold": [], "left": [], "right": [], "counts": [], "gain": []}

        def add(r):
            i = len(cols["feature"])
            cols["feature"].append(r.get("feature", -1))
            cols["threshold"].append(r.get("threshold", np.nan))
            cols["left"].append(-1)
            cols["right"].append(-1)
            cols["counts"].append(r["counts"])
            cols["gain"].append(r.get("gain", 0.0))
            if "left" in r:
                cols["left"][i] = add(r["left"])
                cols["right"][i] = add(r["right"])
            return i

        add(rec)
        return cls(
            feature=np.array(cols["feature"], dtype=np.int64),
            threshold=np.array(cols["threshold"], dtype=np.float64),
            left=np.array(cols["left"], dtype=np.int64),
            right=np.array(cols["right"], dtype=np.int64),
            counts=np.array(cols["counts"], dtype=np.float64).reshape(-1, 2),
            gain=np.array(cols["gain"], dtype=np.float64),
        )


def _fit_weighted(XT, order, y, w, params, rng, n_jobs=1):
    d = XT.shape[0]
    k = resolve_max_features(params.max_features, d)
    sampler = None
    if k < d:
        def sampler(ns):
            pick = np.argsort(rng.random((ns, d)), axis=1)[:, :k]
            mask = np.zeros((ns, d), dtype=bool)
            np.put_along_axis(mask, pick, True, axis=1)
            return mask

    rows = np.flatnonzero(w > 0)
    flat = grow(XT, order, rows, w, w * y, criterion="gini",
                max_depth=params.max_depth,
                min_samples_split=float(params.min_samples_split),
                feature_sampler=sampler, n_jobs=n_jobs)
    counts = np.column_stack([flat.stat_a - flat.stat_b, flat.stat_b])
    return Tree(flat.feature, flat.threshold, flat.left, flat.right, counts, flat.gain)


def fit_tree(X, y, params=None, rng=None, sample_weight=None, n_jobs=1):
    """Fit a single CART tree.

    Parameters
    ----------
    X : (n, d) array
    y : (n,) array of 0/1
    params : TreeParams, optional
    rng : numpy Generator or int seed, used only when ``max_features < d``.
    sample_weight : (n,) nonnegative integer weights (bootstrap counts).
    """
    X, y = check_xy(X, y)
    params = params or TreeParams()
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    w = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    XT = np.ascontiguousarray(X.T)
    return _fit_weighted(XT, presort(XT), y, w, params, rng, n_jobs=n_jobs)


@dataclass
class ForestModel:
    trees: list
    params: ForestParams
    seed: int
    n_features: int
    feature_order: list = field(default_factory=list)

    def predict_proba(self, X):
        return predict_proba_forest(self, X)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def importances(self):
        return impurity_importance(self)

    def to_dict(self):
        return {
            "params": asdict(self.params),
            "seed": int(self.seed),
            "n_features": int(self.n_features),
            "feature_order": list(self.feature_order),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, rec):
        return cls(
            trees=[Tree.from_dict(t) for t in rec["trees"]],
            params=ForestParams(**rec["params"]),
            seed=rec["seed"],
            n_features=rec["n_features"],
            feature_order=list(rec["feature_order"]),
        )


def fit_forest(X, y, params=None, seed=0, feature_order=None, n_jobs=1):
    """Fit a random forest; tree ``i`` draws from ``rng_for(seed, 'tree', i)``.

    With ``n_jobs > 1`` trees are grown on a thread pool. Per-tree seeding makes
    the result identical to the serial fit.
    """
    X, y = check_xy(X, y)
    params = params or ForestParams()
    if params.n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    n, d = X.shape
    resolve_max_features(params.max_features, d)
    XT = np.ascontiguousarray(X.T)
    order = presort(XT)
    tp = params.tree_params()

    def one(i):
        rng = rng_for(seed, "tree", i)
        if params.bootstrap:
            w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            w = np.ones(n)
        return _fit_weighted(XT, order, y, w, tp, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(one, range(params.n_trees)))
    else:
        trees = [one(i) for i in range(params.n_trees)]
    names = list(feature_order) if feature_order is not None else [f"x{j}" for j in range(d)]
    return ForestModel(trees=trees, params=params, seed=int(seed), n_features=d, feature_order=names)


def predict_proba_forest(model, X):
    X = check_xy(X)
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    total = np.zeros(X.shape[0])
    for t in model.trees:
        total += t.probability[t.apply(X)]
    return total / len(model.trees)


def tree_importance(tree, n_features):
    """Unnormalised weighted impurity decrease per feature for one tree."""
    internal = tree.left >= 0
    weight = tree.counts.sum(axis=1)
    contrib = weight[internal] * tree.gain[internal] / weight[0]
    return np.bincount(tree.feature[internal], weights=contrib, minlength=n_features)


def impurity_importance(model):
    """Total weighted Gini decrease per feature, normalised to sum to 1."""
    total = np.zeros(model.n_features)
    for t in model.trees:
        total += tree_importance(t, model.n_features)
    s = total.sum()
    return total / s if s > 0 else total
