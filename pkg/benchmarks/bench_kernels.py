"""Time the numba kernels against the numpy fallback.

Runs a forest fit, a boosted fit and batch prediction under each backend and
reports wall time per stage plus the time spent inside each kernel. The
numba column excludes compilation (a warm-up fit runs first).

    python3 benchmarks/bench_kernels.py --rows 20000 --features 20
"""
import argparse
import time
from collections import defaultdict

import numpy as np

from salestack import _kernels
from salestack.boost import BoostParams, fit_boosted, predict_proba_boosted
from salestack.tree import ForestParams, fit_forest, predict_proba_forest

KERNELS = ("gini_scan", "newton_scan", "partition_order", "apply_tree")


def _instrument(spent):
    """Wrap the dispatching kernel entry points so each call is timed."""
    originals = {k: getattr(_kernels, k) for k in KERNELS}

    def wrap(name, fn):
        def timed(*args):
            t = time.perf_counter()
            out = fn(*args)
            spent[name] += time.perf_counter() - t
            return out
        return timed

    for k, fn in originals.items():
        setattr(_kernels, k, wrap(k, fn))
    return originals


def _data(rows, features, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(rows, features))
    X[:, : features // 2] = np.round(X[:, : features // 2], 1)
    z = X @ rng.normal(size=features) + np.sin(3 * X[:, 0])
    y = (z + rng.logistic(size=rows) > 0).astype(np.int64)
    return X, y


def _run(X, y, args):
    stages = {}
    t = time.perf_counter()
    forest = fit_forest(X, y, ForestParams(n_trees=args.trees), seed=1)
    stages["forest fit"] = time.perf_counter() - t
    t = time.perf_counter()
    boosted = fit_boosted(X, y, BoostParams(n_rounds=args.rounds, max_depth=4), seed=1)
    stages["boosted fit"] = time.perf_counter() - t
    t = time.perf_counter()
    pf = predict_proba_forest(forest, X)
    pb = predict_proba_boosted(boosted, X)
    stages["predict"] = time.perf_counter() - t
    return stages, (pf, pb)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--features", type=int, default=20)
    ap.add_argument("--trees", type=int, default=30)
    ap.add_argument("--rounds", type=int, default=60)
    args = ap.parse_args(argv)

    X, y = _data(args.rows, args.features, 0)
    backends = ["numpy"]
    try:
        _kernels.backend_module("numba")
        backends.insert(0, "numba")
        Xw, yw = _data(500, args.features, 1)
        _kernels.BACKEND = "numba"
        _run(Xw, yw, argparse.Namespace(trees=2, rounds=2))
    except RuntimeError:
        print("numba unavailable; timing numpy only")

    results, preds = {}, {}
    saved = _kernels.BACKEND
    for name in backends:
        _kernels.BACKEND = name
        spent = defaultdict(float)
        originals = _instrument(spent)
        try:
            stages, preds[name] = _run(X, y, args)
        finally:
            for k, fn in originals.items():
                setattr(_kernels, k, fn)
        results[name] = (stages, dict(spent))
    _kernels.BACKEND = saved

    print(f"rows={args.rows} features={args.features} trees={args.trees} rounds={args.rounds}")
    print(f"{'':18}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    rows = [(k, lambda r, k=k: r[0][k]) for k in ("forest fit", "boosted fit", "predict")]
    rows += [(f"  {k}", lambda r, k=k: r[1].get(k, 0.0)) for k in KERNELS]
    for label, get in rows:
        vals = [get(results[b]) for b in backends]
        line = f"{label:18}" + "".join(f"{v:11.3f}s" for v in vals)
        if len(vals) > 1 and vals[0] > 0:
            line += f"{vals[1] / vals[0]:11.1f}x"
        print(line)
    if len(backends) > 1:
        same = all(np.array_equal(a, b) for a, b in zip(preds["numba"], preds["numpy"]))
        print("predictions identical across backends:", same)


if __name__ == "__main__":
    main()
