"""Second-order gradient-boosted trees for binary log-loss.

Each round fits a regression tree to the per-row gradient and hessian of the
log-loss in logit space. The objective is the training loss plus
``gamma * T + 0.5 * lam * ||w||^2`` per tree (T leaves, leaf weights w); leaf
weights and split gains are its closed-form minimisers.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._grower import grow, presort
from .tree import check_xy

PROB_EPS = 1e-12


def sigmoid(z):
    """Logistic function, stable for large ``|z|``."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def logloss(p, y):
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def logloss_grad_hess(p, y):
    """Gradient and hessian of the log-loss with respect to the logit."""
    p = np.asarray(p, dtype=np.float64)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    y = np.asarray(y, dtype=np.float64)
    return p - y, p * (1.0 - p)


def leaf_weight(G, H, lam):
    """Minimiser ``-G / (H + lam)`` of ``G*w + 0.5*(H + lam)*w^2``."""
    denom = H + lam
    if np.any(np.asarray(denom) <= 0):
        raise ValueError("H + lambda must be positive")
    return -G / denom


def split_gain(GL, HL, GR, HR, lam, gamma):
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam)
                  - (GL + GR) ** 2 / (HL + HR + lam)) - gamma


@dataclass
class BoostParams:
    n_rounds: int = 300
    eta: float = 0.1
    lam: float = 1.0
    gamma: float = 0.0
    max_depth: int = 6
    min_child_hessian: float = 1.0
    base_score: float = 0.5

    def __post_init__(self):
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if self.eta < 0 or self.lam < 0 or self.gamma < 0 or self.min_child_hessian < 0:
            raise ValueError("eta, lam, gamma and min_child_hessian must be nonnegative")
        if not 0.0 < self.base_score < 1.0:
            raise ValueError("base_score must lie in (0, 1)")

    def to_dict(self):
        return {"n_rounds": self.n_rounds, "eta": self.eta, "lambda": self.lam,
                "gamma": self.gamma, "max_depth": self.max_depth,
                "min_child_hessian": self.min_child_hessian, "base_score": self.base_score}

    @classmethod
    def from_dict(cls, rec):
        rec = dict(rec)
        rec["lam"] = rec.pop("lambda")
        return cls(**rec)


@dataclass
class BoostedTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    gain: np.ndarray

    @property
    def n_leaves(self):
        return int((self.left < 0).sum())

    def apply(self, X):
        return _kernels.apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def predict(self, X):
        return self.weight[self.apply(X)]

    def to_dict(self):
        def node(i):
            rec = {"G": float(self.grad[i]), "H": float(self.hess[i])}
            if self.left[i] < 0:
                rec["weight"] = float(self.weight[i])
                return rec
            rec.update(feature=int(self.feature[i]), threshold=float(self.threshold[i]),
                       gain=float(self.gain[i]), left=node(self.left[i]),
                       right=node(self.right[i]))
            return rec

        return node(0)

    @classmethod
    def from_dict(cls, rec):
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "weight", "grad", "hess", "gain")}

        def add(r):
            i = len(cols["feature"])
            cols["feature"].append(r.get("feature", -1))
            cols["threshold"].append(r.get("threshold", np.nan))
            cols["left"].append(-1)
            cols["right"].append(-1)
            cols["weight"].append(r.get("weight", 0.0))
            cols["grad"].append(r["G"])
            cols["hess"].append(r["H"])
            cols["gain"].append(r.get("gain", 0.0))
            if "left" in r:
                cols["left"][i] = add(r["left"])
                cols["right"][i] = add(r["right"])
            return i

        add(rec)
        ints = ("feature", "left", "right")
        return cls(**{k: np.array(v, dtype=np.int64 if k in ints else np.float64)
                      for k, v in cols.items()})


@dataclass
class BoostedModel:
    trees: list
    params: BoostParams
    n_features: int
    feature_order: list = field(default_factory=list)
    history: list = field(default_factory=list)

    @property
    def base_logit(self):
        b = self.params.base_score
        return float(np.log(b / (1.0 - b)))

    def predict_margin(self, X, n_trees=None):
        X = check_xy(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        margin = np.full(X.shape[0], self.base_logit)
        for t in self.trees[:n_trees]:
            margin += self.params.eta * t.predict(X)
        return margin

    def predict_proba(self, X):
        return predict_proba_boosted(self, X)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def importances(self):
        return gain_importance(self)

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "n_features": int(self.n_features),
            "feature_order": list(self.feature_order),
            "history": [float(v) for v in self.history],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, rec):
        return cls(
            trees=[BoostedTree.from_dict(t) for t in rec["trees"]],
            params=BoostParams.from_dict(rec["params"]),
            n_features=rec["n_features"],
            feature_order=list(rec["feature_order"]),
            history=list(rec["history"]),
        )


def fit_boosted(X, y, params=None, seed=0, feature_order=None, n_jobs=1):
    """Fit boosted trees by exact greedy split enumeration.

    Boosting stops early when a round accepts no split: a lone root leaf would
    only shift the intercept away from ``base_score``. ``seed`` is accepted for
    interface symmetry; the algorithm itself draws no random numbers.

    ``history[k]`` is the mean training log-loss after ``k`` trees.
    """
    X, y = check_xy(X, y)
    params = params or BoostParams()
    n, d = X.shape
    XT = np.ascontiguousarray(X.T)
    order = presort(XT)
    rows = np.arange(n)
    base = float(np.log(params.base_score / (1.0 - params.base_score)))
    margin = np.full(n, base)
    p = np.clip(sigmoid(margin), PROB_EPS, 1.0 - PROB_EPS)
    history = [logloss(p, y)]
    trees = []
    for _ in range(params.n_rounds):
        g, h = logloss_grad_hess(p, y)
        flat = grow(XT, order, rows, g, h, criterion="newton", max_depth=params.max_depth,
                    lam=params.lam, gamma=params.gamma,
                    min_hess=params.min_child_hessian, n_jobs=n_jobs)
        if flat.n_nodes == 1:
            break
        leaf = flat.left < 0
        weight = np.zeros(flat.n_nodes)
        weight[leaf] = leaf_weight(flat.stat_a[leaf], flat.stat_b[leaf], params.lam)
        t = BoostedTree(flat.feature, flat.threshold, flat.left, flat.right, weight,
                        flat.stat_a, flat.stat_b, flat.gain)
        trees.append(t)
        margin += params.eta * t.predict(X)
        p = np.clip(sigmoid(margin), PROB_EPS, 1.0 - PROB_EPS)
        history.append(logloss(p, y))
    names = list(feature_order) if feature_order is not None else [f"x{j}" for j in range(d)]
    return BoostedModel(trees=trees, params=params, n_features=d, feature_order=names,
                        history=history)


def predict_proba_boosted(model, X):
    return sigmoid(model.predict_margin(X))


def gain_importance(model):
    """Total split gain per feature, normalised to sum to 1."""
    total = np.zeros(model.n_features)
    for t in model.trees:
        internal = t.left >= 0
        total += np.bincount(t.feature[internal], weights=t.gain[internal],
                             minlength=model.n_features)
    s = total.sum()
    return total / s if s > 0 else total
