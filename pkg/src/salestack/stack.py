"""Four-layer stacking: socio-only and market generators feed meta-features F1, F2.

Layer 1 is the 21-feature market frame, layer 2 adds the five socio columns
(and a parallel socio-only view), layer 3 fits the generators and produces
F1 (socio-only) and F2 (26-feature market) probabilities, out-of-fold on
training rows, and layer 4 fits the final model on the 28 columns.
"""
from dataclasses import dataclass, field

import numpy as np

from ._rng import child_seed
from .evalx import report
from .folds import holdout_split, stratified_kfold
from .frame import SOCIO_COLUMNS, TARGET
from .pipeline import (FAMILIES, STAGE3_BASE_FEATURES, STAGE3_FEATURES, FittedPipeline,
                       PipelineSpec, stage_spec)


@dataclass(frozen=True)
class StackSpec:
    """Configuration of the stack.

    ``generators`` maps ``"F1"``/``"F2"`` to a family (forest or boosted);
    ``generator_params`` maps a family to its params.
    """

    final_family: str = "boosted"
    final_params: dict = field(default_factory=dict)
    generators: dict = field(default_factory=lambda: {"F1": "boosted", "F2": "boosted"})
    generator_params: dict = field(default_factory=dict)
    meta_folds: int = 5
    enc_k: float = 20.0
    enc_folds: int = 5
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        for name, fam in self.generators.items():
            if name not in ("F1", "F2") or fam not in ("forest", "boosted"):
                raise ValueError(f"generator {name}={fam!r} must be forest or boosted for F1/F2")
        if self.final_family not in FAMILIES:
            raise ValueError(f"unknown final family {self.final_family!r}")

    def socio_spec(self):
        fam = self.generators["F1"]
        return PipelineSpec(fam, dict(self.generator_params.get(fam, {})), SOCIO_COLUMNS,
                            seed=child_seed(self.seed, "F1"), n_jobs=self.n_jobs)

    def market_spec(self):
        fam = self.generators["F2"]
        return PipelineSpec(fam, dict(self.generator_params.get(fam, {})), STAGE3_BASE_FEATURES,
                            encode=True, enc_k=self.enc_k, enc_folds=self.enc_folds,
                            seed=child_seed(self.seed, "F2"), n_jobs=self.n_jobs)

    def final_spec(self):
        return PipelineSpec(self.final_family, dict(self.final_params), STAGE3_FEATURES,
                            encode=True, enc_k=self.enc_k, enc_folds=self.enc_folds,
                            seed=child_seed(self.seed, "final"), n_jobs=self.n_jobs)

    def to_dict(self):
        return {"final_family": self.final_family, "final_params": dict(self.final_params),
                "generators": dict(self.generators),
                "generator_params": {k: dict(v) for k, v in self.generator_params.items()},
                "meta_folds": self.meta_folds, "enc_k": self.enc_k, "enc_folds": self.enc_folds,
                "seed": self.seed}


@dataclass(frozen=True)
class MetaFeatures:
    """Layer-3 output: full-fit generators plus out-of-fold F1/F2 on training rows."""

    socio_model: FittedPipeline
    market_model: FittedPipeline
    f1_oof: np.ndarray
    f2_oof: np.ndarray
    assignments: np.ndarray

    def transform(self, frame):
        """Inference-time F1, F2 from the full-fit generators."""
        return self.socio_model.predict_proba(frame), self.market_model.predict_proba(frame)


def fit_meta_features(frame, spec, plan=None, target=TARGET):
    """Fit the generators and compute out-of-fold F1/F2 for every training row.

    ``plan`` fixes the meta folds; by default a stratified plan is drawn from
    the stack seed.
    """
    y = frame[target]
    if plan is None:
        plan = stratified_kfold(y, spec.meta_folds, child_seed(spec.seed, "meta"))
    if plan.n_rows != frame.n_rows:
        raise ValueError("meta fold plan does not match the frame")
    f1 = np.empty(frame.n_rows)
    f2 = np.empty(frame.n_rows)
    socio, market = spec.socio_spec(), spec.market_spec()
    for tr, te in plan.splits():
        part = frame.take(tr)
        held = frame.take(te)
        f1[te] = socio.fit(part, target).predict_proba(held)
        f2[te] = market.fit(part, target).predict_proba(held)
    return MetaFeatures(socio.fit(frame, target), market.fit(frame, target), f1, f2,
                        plan.assignments.copy())


@dataclass(frozen=True)
class StackedModel:
    meta: MetaFeatures
    final_model: FittedPipeline
    spec: StackSpec

    @property
    def socio_model(self):
        return self.meta.socio_model

    @property
    def market_model(self):
        return self.meta.market_model

    @property
    def feature_order(self):
        return list(STAGE3_FEATURES)

    def assemble(self, frame):
        """The 28-column inference matrix."""
        f1, f2 = self.meta.transform(frame)
        return self.final_model.design(frame.with_columns(F1=f1, F2=f2))

    def predict_proba(self, frame):
        return self.final_model.model.predict_proba(self.assemble(frame))

    def predict(self, frame):
        return (self.predict_proba(frame) >= 0.5).astype(np.int64)

    def importances(self):
        return self.final_model.importances()

    def to_dict(self):
        return {"spec": self.spec.to_dict(),
                "socio_model": self.meta.socio_model.to_dict(),
                "market_model": self.meta.market_model.to_dict(),
                "final_model": self.final_model.to_dict(),
                "feature_order": {"socio": list(SOCIO_COLUMNS),
                                  "market": list(STAGE3_BASE_FEATURES),
                                  "final": list(STAGE3_FEATURES)}}

    @classmethod
    def from_dict(cls, rec):
        s = dict(rec["spec"])
        spec = StackSpec(**s)
        meta = MetaFeatures(FittedPipeline.from_dict(rec["socio_model"]),
                            FittedPipeline.from_dict(rec["market_model"]),
                            np.empty(0), np.empty(0), np.empty(0, dtype=np.int64))
        return cls(meta, FittedPipeline.from_dict(rec["final_model"]), spec)


def build_stack(frame, spec=None, plan=None, meta=None, target=TARGET):
    """Fit the full stack on a prepared, socio-joined frame.

    A precomputed ``meta`` (from :func:`fit_meta_features` on the same frame)
    can be shared between stacks that differ only in the final model.
    """
    spec = spec or StackSpec()
    missing = [c for c in SOCIO_COLUMNS if c not in frame]
    if missing:
        raise ValueError(f"frame lacks socio columns {missing}; join them first")
    if meta is None:
        meta = fit_meta_features(frame, spec, plan, target)
    train = frame.with_columns(F1=meta.f1_oof, F2=meta.f2_oof)
    final = spec.final_spec().fit(train, target)
    return StackedModel(meta, final, spec)


def predict_stacked(model, frame):
    """Return ``(classes, probabilities)`` of the stacked model on new rows."""
    p = model.predict_proba(frame)
    return (p >= 0.5).astype(np.int64), p


@dataclass(frozen=True)
class AblationRow:
    family: str
    stage: int
    report: object
    protocol: str


def _stage_probs(train, test, stage, family, params, seed, n_jobs, stack_spec, meta_cache):
    if stage in (1, 2):
        spec = stage_spec(stage, family, params.get(family, {}), seed=child_seed(seed, "stage", stage),
                          n_jobs=n_jobs)
        return spec.fit(train).predict_proba(test)
    if "meta" not in meta_cache:
        meta_cache["meta"] = fit_meta_features(train, stack_spec)
    sspec = StackSpec(family, dict(params.get(family, {})), dict(stack_spec.generators),
                      stack_spec.generator_params, stack_spec.meta_folds, stack_spec.enc_k,
                      stack_spec.enc_folds, stack_spec.seed, n_jobs)
    return build_stack(train, sspec, meta=meta_cache["meta"]).predict_proba(test)


def ablation_table(frame, families=FAMILIES, stages=(1, 2, 3), params=None, protocol="holdout",
                   test_fraction=0.25, cv_k=10, seed=0, stack_spec=None, n_jobs=1):
    """One :class:`EvalReport` per (family, stage) under a holdout or k-fold protocol.

    In CV mode predictions from all folds are pooled before scoring. Layer-3
    generators are fitted once per training split and shared by all families.
    """
    params = params or {}
    stack_spec = stack_spec or StackSpec(seed=child_seed(seed, "stack"), n_jobs=n_jobs)
    y = np.asarray(frame[TARGET])
    if protocol == "holdout":
        tr, te = holdout_split(y, test_fraction, seed)
        splits = [(tr, te)]
    elif protocol == "cv":
        splits = list(stratified_kfold(y, cv_k, child_seed(seed, "outer")).splits())
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    probs = {(f, s): np.empty(y.size) for f in families for s in stages}
    for tr, te in splits:
        train, test = frame.take(tr), frame.take(te)
        cache = {}
        for s in stages:
            for f in families:
                probs[(f, s)][te] = _stage_probs(train, test, s, f, params, seed, n_jobs,
                                                 stack_spec, cache)
    scored = np.concatenate([te for _, te in splits])
    label = "holdout" if protocol == "holdout" else f"cv{cv_k}"
    rows = []
    for s in stages:
        for f in families:
            pred = (probs[(f, s)][scored] >= 0.5).astype(np.int64)
            rows.append(AblationRow(f, s, report(y[scored], pred), label))
    return rows
