"""Stratified fold plans and holdout splits."""
import warnings
from dataclasses import dataclass

import numpy as np

from ._rng import rng_for


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every row to one of ``k`` folds."""

    k: int
    assignments: np.ndarray
    seed: int = 0

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        if a.size and (a.min() < 0 or a.max() >= self.k):
            raise ValueError("fold ids must lie in [0, k)")
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    @property
    def n_rows(self):
        return int(self.assignments.size)

    def test_index(self, j):
        return np.flatnonzero(self.assignments == j)

    def train_index(self, j):
        return np.flatnonzero(self.assignments != j)

    def splits(self):
        """Yield ``(train_index, test_index)`` for folds ``0 .. k-1``."""
        for j in range(self.k):
            yield self.train_index(j), self.test_index(j)

    def permute(self, perm):
        """Plan for the rows reordered as ``rows[perm]``."""
        return FoldPlan(self.k, self.assignments[np.asarray(perm)], self.seed)

    def subset(self, index):
        return FoldPlan(self.k, self.assignments[np.asarray(index)], self.seed)


def stratified_kfold(y, k, seed=0):
    """Shuffle each class with ``seed`` and deal its rows round-robin to ``k`` folds.

    The second class continues the deal where the first stopped, so fold sizes
    also differ by at most one.
    """
    y = np.asarray(y)
    n = y.size
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows ({n})")
    rng = rng_for(seed, "folds", k)
    out = np.empty(n, dtype=np.int64)
    start = 0
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        if idx.size < k:
            warnings.warn(f"class {c} has {idx.size} < k={k} rows; stratification is best-effort",
                          stacklevel=2)
        idx = idx[rng.permutation(idx.size)]
        out[idx] = (start + np.arange(idx.size)) % k
        start = (start + idx.size) % k
    return FoldPlan(int(k), out, int(seed))


def holdout_split(y, test_fraction=0.25, seed=0):
    """Stratified train/test split; returns sorted ``(train_index, test_index)``."""
    y = np.asarray(y)
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = rng_for(seed, "holdout")
    test = []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        test.append(idx[:int(round(test_fraction * idx.size))])
    test = np.sort(np.concatenate(test))
    train = np.setdiff1d(np.arange(y.size), test)
    if train.size == 0 or test.size == 0:
        raise ValueError("holdout split produced an empty side")
    return train, test
