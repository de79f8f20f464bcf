"""Smoothed out-of-fold target-mean encoding.

A level ``c`` is encoded as ``(sum_c + k * prior) / (count_c + k)``. Training
rows of fold ``j`` see only statistics from the other folds, prior included,
so their encodings carry no information about their own targets. New rows use
the statistics of the whole training set.
"""
from dataclasses import dataclass

import numpy as np

from .folds import FoldPlan, stratified_kfold
from .frame import MARKET_FEATURES, CATEGORICAL_FEATURES, REAL, TARGET

# derived key name -> (source columns, key function)
YEAR_KEYS = {
    "ys1": (("sale_date",), lambda f: f["sale_date"] // 12),
    "ys2": (("sale_date",), lambda f: f["sale_date"] % 12 + 1),
    "yb1": (("yrblt",), lambda f: np.floor(f["yrblt"] / 10.0) * 10.0),
    "yb2": (("yrblt",), lambda f: f["yrblt"]),
}
# year encodings take the place of the raw calendar columns in the feature list
YEAR_REPLACES = {"sale_year": "ys1", "sale_month": "ys2", "yrblt": "yb2", "age": "yb1"}
ENCODED_MARKET_FEATURES = tuple(YEAR_REPLACES.get(c, c) for c in MARKET_FEATURES)


@dataclass(frozen=True)
class EncodingMap:
    """Fitted encoder for one column.

    ``fold_sums``/``fold_counts`` hold per-fold target sums and counts of each
    level in ``levels``; the complement of fold ``j`` is total minus row ``j``.
    ``prior`` is the global training mean used at inference; training rows of
    fold ``j`` use ``fold_priors[j]``, the mean over the other folds.
    """

    column: str
    source: str
    k: float
    prior: float
    levels: np.ndarray
    fold_sums: np.ndarray
    fold_counts: np.ndarray
    fold_priors: np.ndarray
    fold_assignment: np.ndarray

    @property
    def n_folds(self):
        return int(self.fold_sums.shape[0])

    def _smooth(self, s, c, prior):
        denom = c + self.k
        safe = np.where(denom > 0, denom, 1.0)
        return np.where(denom > 0, (s + self.k * prior) / safe, prior)

    def lookup(self, keys, fold=None):
        """Encode raw ``keys``; ``fold`` (per row) selects out-of-fold statistics."""
        keys = np.asarray(keys, dtype=np.float64)
        pos = np.searchsorted(self.levels, keys)
        pos_c = np.minimum(pos, max(self.levels.size - 1, 0))
        seen = (pos < self.levels.size) & (self.levels[pos_c] == keys)
        tot_s = self.fold_sums.sum(axis=0)
        tot_c = self.fold_counts.sum(axis=0)
        if fold is None:
            s = np.where(seen, tot_s[pos_c], 0.0)
            c = np.where(seen, tot_c[pos_c], 0.0)
            return self._smooth(s, c, self.prior)
        fold = np.asarray(fold, dtype=np.int64)
        s = np.where(seen, tot_s[pos_c] - self.fold_sums[fold, pos_c], 0.0)
        c = np.where(seen, tot_c[pos_c] - self.fold_counts[fold, pos_c], 0.0)
        return self._smooth(s, c, self.fold_priors[fold])

    def to_dict(self):
        return {
            "column": self.column, "source": self.source, "k": float(self.k),
            "prior": float(self.prior), "levels": self.levels.tolist(),
            "fold_sums": self.fold_sums.tolist(), "fold_counts": self.fold_counts.tolist(),
            "fold_priors": self.fold_priors.tolist(),
            "fold_assignment": self.fold_assignment.tolist(),
        }

    @classmethod
    def from_dict(cls, rec):
        return cls(rec["column"], rec["source"], float(rec["k"]), float(rec["prior"]),
                   np.array(rec["levels"], dtype=np.float64),
                   np.array(rec["fold_sums"], dtype=np.float64).reshape(-1, len(rec["levels"])),
                   np.array(rec["fold_counts"], dtype=np.float64).reshape(-1, len(rec["levels"])),
                   np.array(rec["fold_priors"], dtype=np.float64),
                   np.array(rec["fold_assignment"], dtype=np.int64))


def _keys(frame, source):
    if source in YEAR_KEYS:
        return np.asarray(YEAR_KEYS[source][1](frame), dtype=np.float64)
    return np.asarray(frame[source], dtype=np.float64)


def fit_keys(keys, y, column, source, k=20.0, plan=None, n_folds=5, seed=0):
    """Fit an :class:`EncodingMap` from raw level keys and binary targets."""
    keys = np.asarray(keys, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if k < 0:
        raise ValueError("smoothing k must be nonnegative")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("target must be binary")
    if y.min() == y.max():
        raise ValueError("target is constant; the encoding prior is degenerate")
    if plan is None:
        if n_folds > y.size:
            raise ValueError(f"n_folds={n_folds} exceeds the number of rows ({y.size})")
        plan = stratified_kfold(y, n_folds, seed)
    if plan.n_rows != y.size:
        raise ValueError("fold plan does not match the number of rows")
    levels, inv = np.unique(keys, return_inverse=True)
    L, K = levels.size, plan.k
    flat = plan.assignments * L + inv
    sums = np.bincount(flat, weights=y, minlength=K * L).reshape(K, L)
    counts = np.bincount(flat, minlength=K * L).astype(np.float64).reshape(K, L)
    fs = sums.sum(axis=1)
    fc = counts.sum(axis=1)
    out_c = fc.sum() - fc
    with np.errstate(invalid="ignore", divide="ignore"):
        fold_priors = np.where(out_c > 0, (fs.sum() - fs) / np.where(out_c > 0, out_c, 1), y.mean())
    return EncodingMap(column, source, float(k), float(y.mean()), levels, sums, counts,
                       fold_priors, plan.assignments.copy())


def fit_mean_encoding(frame, column, target=TARGET, k=20.0, n_folds=5, seed=0, plan=None):
    """Fit a smoothed out-of-fold mean encoding of ``column``.

    ``column`` may be a frame column or one of the derived year keys
    ``ys1, ys2, yb1, yb2``.
    """
    return fit_keys(_keys(frame, column), frame[target], column, column, k=k, plan=plan,
                    n_folds=n_folds, seed=seed)


def apply_encoding(frame, emap, training=False):
    """Replace (or add) ``emap.column`` by its encoding.

    With ``training=True`` the frame must be the one the map was fitted on and
    each row uses its fold's out-of-fold statistics. Otherwise the
    full-training-set statistics apply and unseen levels map to the prior.
    """
    if emap.column in frame.encoded:
        raise ValueError(f"column {emap.column!r} is already encoded")
    fold = None
    if training:
        if frame.n_rows != emap.fold_assignment.size:
            raise ValueError("training-mode encoding needs the frame it was fitted on")
        fold = emap.fold_assignment
    vals = emap.lookup(_keys(frame, emap.source), fold)
    return frame.with_columns(kinds={emap.column: REAL}, encoded=(emap.column,),
                              **{emap.column: vals})


def year_features(frame, target=TARGET, k=20.0, n_folds=5, seed=0, plan=None):
    """Add the out-of-fold year encodings ys1, ys2, yb1, yb2.

    Returns ``(frame, maps)``; the raw calendar columns they replace are
    dropped from the returned frame.
    """
    if plan is None:
        plan = stratified_kfold(frame[target], n_folds, seed)
    maps = [fit_mean_encoding(frame, name, target, k, plan=plan) for name in YEAR_KEYS]
    out = frame
    for m in maps:
        out = apply_encoding(out, m, training=True)
    return out.drop([c for c in YEAR_REPLACES if c in out]), maps


@dataclass(frozen=True)
class FrameEncoder:
    """The categorical and year encodings of one training frame, fitted together."""

    maps: tuple

    @classmethod
    def fit(cls, frame, target=TARGET, k=20.0, n_folds=5, seed=0, plan=None):
        if plan is None:
            plan = stratified_kfold(frame[target], n_folds, seed)
        names = list(CATEGORICAL_FEATURES) + list(YEAR_KEYS)
        return cls(tuple(fit_mean_encoding(frame, c, target, k, plan=plan) for c in names))

    def transform(self, frame, training=False):
        out = frame
        for m in self.maps:
            out = apply_encoding(out, m, training=training)
        return out

    def to_dict(self):
        return [m.to_dict() for m in self.maps]

    @classmethod
    def from_dict(cls, rec):
        return cls(tuple(EncodingMap.from_dict(r) for r in rec))


__all__ = ["EncodingMap", "FrameEncoder", "FoldPlan", "fit_keys", "fit_mean_encoding",
           "apply_encoding", "year_features", "ENCODED_MARKET_FEATURES", "YEAR_KEYS"]
