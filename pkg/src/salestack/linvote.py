"""L2-regularised logistic regression and majority/average voting ensembles."""
from dataclasses import dataclass, field

import numpy as np

from .boost import sigmoid
from .tree import check_xy


def _loss_grad(Z, y, w, b, l2):
    """Mean cross-entropy plus ``l2/2 * ||w||^2`` and its gradient in (w, b)."""
    z = Z @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    r = (sigmoid(z) - y) / y.size
    return loss, Z.T @ r + l2 * w, float(r.sum())


def logistic_loss(model, X, y):
    """Regularised training objective of ``model`` on raw features ``X``."""
    Z = model.standardize(check_xy(X))
    return _loss_grad(Z, np.asarray(y, dtype=np.float64), model.weights, model.bias, model.l2)[0]


def logistic_grad(model, X, y):
    """Gradient of the objective in standardised coordinates as ``(grad_w, grad_b)``."""
    Z = model.standardize(check_xy(X))
    _, gw, gb = _loss_grad(Z, np.asarray(y, dtype=np.float64), model.weights, model.bias, model.l2)
    return gw, gb


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    l2: float
    mean: np.ndarray
    scale: np.ndarray
    feature_order: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False

    @property
    def n_features(self):
        return int(self.weights.size)

    def standardize(self, X):
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return (X - self.mean) / self.scale

    def decision_function(self, X):
        return self.standardize(check_xy(X)) @ self.weights + self.bias

    def predict_proba(self, X):
        return predict_proba_logistic(self, X)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def importances(self):
        """Absolute standardised coefficients, normalised to sum to 1."""
        a = np.abs(self.weights)
        s = a.sum()
        return a / s if s > 0 else a

    def to_dict(self):
        return {"weights": self.weights.tolist(), "bias": float(self.bias), "l2": float(self.l2),
                "mean": self.mean.tolist(), "scale": self.scale.tolist(),
                "feature_order": list(self.feature_order), "n_iter": int(self.n_iter),
                "converged": bool(self.converged)}

    @classmethod
    def from_dict(cls, rec):
        return cls(np.array(rec["weights"], dtype=np.float64), float(rec["bias"]),
                   float(rec["l2"]), np.array(rec["mean"], dtype=np.float64),
                   np.array(rec["scale"], dtype=np.float64), list(rec["feature_order"]),
                   int(rec["n_iter"]), bool(rec["converged"]))


def fit_logistic(X, y, l2=1e-4, max_iters=2000, tol=1e-6, seed=0, feature_order=None):
    """Full-batch gradient descent with Armijo backtracking on standardised features.

    Starts from the zero model and stops once the gradient's max-norm drops
    below ``tol`` or after ``max_iters`` iterations. The bias is not penalised.
    ``seed`` is accepted for interface symmetry; the fit is deterministic.
    """
    X, y = check_xy(X, y)
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if l2 < 0:
        raise ValueError("l2 must be nonnegative")
    n, d = X.shape
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    w = np.zeros(d)
    b = 0.0
    loss, gw, gb = _loss_grad(Z, y, w, b, l2)
    step = 1.0
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        gnorm2 = gw @ gw + gb * gb
        if max(np.abs(gw).max(initial=0.0), abs(gb)) < tol:
            converged = True
            it -= 1
            break
        step = min(step * 2.0, 1e6)
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            new_loss, ngw, ngb = _loss_grad(Z, y, w_new, b_new, l2)
            if new_loss <= loss - 0.5 * step * gnorm2 or step < 1e-14:
                break
            step *= 0.5
        if new_loss > loss:
            # no descent possible at machine precision
            converged = True
            break
        w, b, loss, gw, gb = w_new, b_new, new_loss, ngw, ngb
    names = list(feature_order) if feature_order is not None else [f"x{j}" for j in range(d)]
    return LinearModel(w, float(b), float(l2), mean, scale, names, it, converged)


def predict_proba_logistic(model, X):
    return sigmoid(model.decision_function(X))


@dataclass
class VotingModel:
    """Committee of fitted classifiers sharing one feature order."""

    members: list
    mode: str = "soft"
    names: list = field(default_factory=list)
    feature_order: list = field(default_factory=list)

    def __post_init__(self):
        if not self.members:
            raise ValueError("a voting model needs at least one member")
        if self.mode not in ("hard", "soft"):
            raise ValueError(f"unknown voting mode {self.mode!r}")

    def predict_proba(self, X):
        return predict_voting(self, X)[1]

    def predict(self, X):
        return predict_voting(self, X)[0]

    def importances(self):
        """Mean of the members' normalised importances."""
        imp = np.mean([m.importances() for m in self.members], axis=0)
        s = imp.sum()
        return imp / s if s > 0 else imp


def predict_voting(model, X):
    """Return ``(classes, probabilities)``.

    Soft voting averages member probabilities and predicts 1 when the mean is
    at least 0.5. Hard voting reports the fraction of members voting 1 and
    predicts 1 only on a strict majority, so exact ties go to class 0.
    """
    if not model.members:
        raise ValueError("empty member list")
    probs = np.array([m.predict_proba(X) for m in model.members])
    if model.mode == "soft":
        p = probs.mean(axis=0)
        return (p >= 0.5).astype(np.int64), p
    votes = (probs >= 0.5).sum(axis=0)
    m = len(model.members)
    return (2 * votes > m).astype(np.int64), votes / m
