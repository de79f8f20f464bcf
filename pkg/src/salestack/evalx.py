"""Binary classifier diagnostics: confusion-derived metrics, ROC/AUC, K-S, gains and lift."""
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import svg


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, y_true, y_pred):
        t = np.asarray(y_true).astype(bool)
        p = np.asarray(y_pred).astype(bool)
        return cls(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)), int(np.sum(t & ~p)))


@dataclass(frozen=True)
class EvalReport:
    """Scalar metrics; per-class tuples are indexed by class (0, 1)."""

    accuracy: float
    error_rate: float
    precision: tuple
    recall: tuple
    f1: tuple
    macro_precision: float
    macro_recall: float
    macro_f1: float
    n: int
    confusion: ConfusionMatrix
    warnings: tuple = ()

    def as_row(self):
        """Values for the metrics CSV: accuracy, macro precision/recall/F1, error rate."""
        return (self.accuracy, self.macro_precision, self.macro_recall, self.macro_f1,
                self.error_rate)

    def text(self, title=""):
        lines = [title] if title else []
        lines.append(f"{'class':>8} {'precision':>10} {'recall':>10} {'f1':>10}")
        for c in (0, 1):
            lines.append(f"{c:>8} {self.precision[c]:10.4f} {self.recall[c]:10.4f} {self.f1[c]:10.4f}")
        lines.append(f"{'macro':>8} {self.macro_precision:10.4f} {self.macro_recall:10.4f} "
                     f"{self.macro_f1:10.4f}")
        lines.append(f"accuracy {self.accuracy:.4f}  error rate {self.error_rate:.4f}  n {self.n}")
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"


def _check_binary(y, name):
    y = np.asarray(y)
    if y.ndim != 1 or y.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.isin(y, (0, 1)).all():
        raise ValueError(f"{name} must be binary 0/1")
    return y.astype(np.int64)


def _ratio(a, b):
    return a / b if b > 0 else 0.0


def report(y_true, y_pred):
    """Accuracy, per-class and macro precision/recall/F1.

    A class never predicted (or never present) gets precision (or recall) 0
    and a warning entry.
    """
    y_true = _check_binary(y_true, "y_true")
    y_pred = _check_binary(y_pred, "y_pred")
    if y_true.size != y_pred.size:
        raise ValueError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    cm = ConfusionMatrix.from_labels(y_true, y_pred)
    notes = []
    prec, rec, f1 = [], [], []
    for c, (hit, pred_c, true_c) in enumerate([(cm.tn, cm.tn + cm.fn, cm.tn + cm.fp),
                                               (cm.tp, cm.tp + cm.fp, cm.tp + cm.fn)]):
        if pred_c == 0:
            notes.append(f"class {c} never predicted; precision set to 0")
        if true_c == 0:
            notes.append(f"class {c} absent from y_true; recall set to 0")
        p, r = _ratio(hit, pred_c), _ratio(hit, true_c)
        prec.append(p)
        rec.append(r)
        f1.append(_ratio(2 * p * r, p + r))
    for w in notes:
        warnings.warn(w, stacklevel=2)
    acc = (cm.tp + cm.tn) / cm.n
    return EvalReport(acc, 1.0 - acc, tuple(prec), tuple(rec), tuple(f1),
                      (prec[0] + prec[1]) / 2, (rec[0] + rec[1]) / 2, (f1[0] + f1[1]) / 2,
                      cm.n, cm, tuple(notes))


@dataclass
class Curve:
    """Ordered plot points; ``aux`` carries auc, ks/threshold and the class id."""

    kind: str
    x: np.ndarray
    y: np.ndarray
    aux: dict = field(default_factory=dict)

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.y.tolist()))

    def to_csv(self):
        meta = " ".join(f"{k}={v}" for k, v in sorted(self.aux.items()))
        lines = [f"# kind={self.kind}" + (f" {meta}" if meta else ""), "x,y"]
        lines += [f"{repr(float(a))},{repr(float(b))}" for a, b in zip(self.x, self.y)]
        return "\n".join(lines) + "\n"

    def to_svg(self, title=None):
        labels = {"roc": ("false positive rate", "true positive rate"),
                  "ks": ("score threshold", "|TPR - FPR|"),
                  "gains": ("fraction of population", "fraction of positives captured"),
                  "lift": ("fraction of population", "lift")}
        xl, yl = labels.get(self.kind, ("x", "y"))
        baseline = None
        if self.kind in ("roc", "gains"):
            baseline = ([0.0, 1.0], [0.0, 1.0])
        elif self.kind == "lift":
            baseline = ([float(self.x.min()), 1.0], [1.0, 1.0])
        cls = self.aux.get("class")
        label = f"class {cls}" if cls is not None else self.kind
        if title is None:
            title = f"{self.kind.upper()} curve" + (f" (class {cls})" if cls is not None else "")
            if "auc" in self.aux:
                title += f", AUC {self.aux['auc']:.3f}"
            if "ks" in self.aux:
                title += f", K-S {self.aux['ks']:.3f} at {self.aux['threshold']:.3f}"
        ylim = (0.0, 1.0) if self.kind != "lift" else None
        return svg.line_chart([(label, self.x, self.y)], title, xl, yl, ylim=ylim,
                              baseline=baseline)


def _prepare_scores(scores, y_true):
    s = np.asarray(scores, dtype=np.float64)
    y = _check_binary(y_true, "y_true")
    if s.shape != y.shape:
        raise ValueError("scores and y_true differ in length")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    P = int(y.sum())
    N = y.size - P
    if P == 0 or N == 0:
        raise ValueError("both classes must be present")
    return s, y, P, N


def _sweep(s, y):
    """Cumulative positives/negatives at each distinct threshold, descending."""
    thr, inv = np.unique(-s, return_inverse=True)
    pos = np.bincount(inv, weights=y, minlength=thr.size).astype(np.int64)
    neg = np.bincount(inv, minlength=thr.size) - pos
    return -thr, np.cumsum(pos), np.cumsum(neg)


def roc_curve(scores, y_true):
    """ROC points from (0,0) to (1,1), one step per distinct score; returns ``(curve, auc)``.

    The trapezoid sum is accumulated in integers (``2 * P * N * AUC``) and
    divided once, so the AUC equals the pairwise-concordance count exactly.
    """
    s, y, P, N = _prepare_scores(scores, y_true)
    thr, tp, fp = _sweep(s, y)
    tp0 = np.concatenate(([0], tp))
    fp0 = np.concatenate(([0], fp))
    twice_area = int(np.sum((fp0[1:] - fp0[:-1]) * (tp0[1:] + tp0[:-1])))
    auc = twice_area / (2 * P * N)
    curve = Curve("roc", fp0 / N, tp0 / P, {"auc": auc})
    return curve, auc


def roc_auc(scores, y_true):
    return roc_curve(scores, y_true)[1]


def ks_statistic(scores, y_true):
    """Max over distinct thresholds ``t`` of ``|TPR(t) - FPR(t)|`` with positive iff score >= t.

    Returns ``(ks, threshold)``; ties resolve to the lowest threshold.
    """
    s, y, P, N = _prepare_scores(scores, y_true)
    thr, tp, fp = _sweep(s, y)
    gap = np.abs(tp / P - fp / N)
    best = gap.max()
    # thresholds descend, so the last maximiser is the lowest threshold
    i = int(np.flatnonzero(gap == best)[-1])
    return float(best), float(thr[i])


def ks_curve(scores, y_true):
    s, y, P, N = _prepare_scores(scores, y_true)
    thr, tp, fp = _sweep(s, y)
    ks, t = ks_statistic(s, y)
    gap = np.abs(tp / P - fp / N)
    return Curve("ks", thr[::-1].copy(), gap[::-1].copy(), {"ks": ks, "threshold": t})


def _orient(scores, y_true, positive_class):
    if positive_class not in (0, 1):
        raise ValueError("positive_class must be 0 or 1")
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y_true)
    if positive_class == 0:
        return 1.0 - s, 1 - _check_binary(y, "y_true")
    return s, y


def cumulative_gains(scores, y_true, positive_class=1):
    """Fraction of positives captured in the top ``q`` of rows ranked by score.

    Ties keep the original row order. Points at ``q = i/n`` for ``i = 0..n``.
    """
    s, y = _orient(scores, y_true, positive_class)
    s, y, P, N = _prepare_scores(s, y)
    order = np.argsort(-s, kind="stable")
    cum = np.concatenate(([0], np.cumsum(y[order])))
    n = y.size
    return Curve("gains", np.arange(n + 1) / n, cum / P, {"class": positive_class})


def lift_curve(scores, y_true, positive_class=1):
    """Lift ``gains(q) / q`` at deciles ``q = 0.1 .. 1.0``.

    ``gains(q)`` interpolates the gains polyline linearly when ``q * n`` is
    not an integer.
    """
    g = cumulative_gains(scores, y_true, positive_class)
    q = np.arange(1, 11) / 10.0
    return Curve("lift", q, np.interp(q, g.x, g.y) / q, {"class": positive_class})


def class_curves(scores, y_true):
    """The eight curves (roc, ks, gains, lift for each class) keyed ``(kind, class)``.

    Class 0 treats ``1 - score`` as its score and ``1 - y`` as its label.
    """
    out = {}
    for c in (0, 1):
        s, y = _orient(scores, y_true, c)
        roc, auc = roc_curve(s, y)
        roc.aux["class"] = c
        ks = ks_curve(s, y)
        ks.aux["class"] = c
        out[("roc", c)] = roc
        out[("ks", c)] = ks
        out[("gains", c)] = cumulative_gains(scores, y_true, c)
        out[("lift", c)] = lift_curve(scores, y_true, c)
    return out
