import numpy as np
import pytest
from numpy.testing import assert_array_equal

from salestack.folds import stratified_kfold
from salestack.frame import MARKET_FEATURES, SOCIO_COLUMNS, TARGET
from salestack.pipeline import (FAMILIES, STAGE3_FEATURES, FittedPipeline, PipelineSpec,
                                model_from_dict, model_to_dict, stage_spec)
from salestack.stack import (StackSpec, StackedModel, ablation_table, build_stack,
                             fit_meta_features, predict_stacked)

FAST = {"boosted": {"n_rounds": 15, "max_depth": 3}, "forest": {"n_trees": 8, "max_depth": 6},
        "logistic": {}, "voting": {"forest": {"n_trees": 5}, "boosted": {"n_rounds": 5}}}


def test_stage3_feature_count():
    assert len(STAGE3_FEATURES) == 28
    assert STAGE3_FEATURES[-2:] == ("F1", "F2")


@pytest.mark.parametrize("family", FAMILIES)
def test_pipeline_fit_predict_round_trip(synth_small, family):
    spec = stage_spec(2, family, FAST[family], seed=4)
    fitted = spec.fit(synth_small)
    p = fitted.predict_proba(synth_small)
    assert p.shape == (synth_small.n_rows,)
    assert np.all((p >= 0) & (p <= 1))
    back = FittedPipeline.from_dict(fitted.to_dict())
    assert_array_equal(back.predict_proba(synth_small), p)
    imp = fitted.importances()
    assert imp.shape == (26,)
    assert model_to_dict(model_from_dict(model_to_dict(fitted.model))) == model_to_dict(fitted.model)


def test_stage_spec_rejects_stage3():
    with pytest.raises(ValueError):
        stage_spec(3)


def test_unknown_family():
    with pytest.raises(ValueError):
        PipelineSpec("svm")


def test_parid_never_a_feature():
    assert "parid" not in MARKET_FEATURES
    assert "parid" not in STAGE3_FEATURES


@pytest.fixture(scope="module")
def stack_spec():
    return StackSpec("boosted", FAST["boosted"], generator_params=FAST, seed=5, meta_folds=3)


@pytest.fixture(scope="module")
def stacked(synth_small, stack_spec):
    return build_stack(synth_small, stack_spec)


def test_meta_features_in_unit_interval(stacked, synth_small):
    for v in (stacked.meta.f1_oof, stacked.meta.f2_oof, *stacked.meta.transform(synth_small)):
        assert np.all((v >= 0) & (v <= 1))
    X = stacked.assemble(synth_small)
    assert X.shape == (synth_small.n_rows, 28)


def test_generator_inputs(stack_spec):
    assert stack_spec.socio_spec().features == SOCIO_COLUMNS
    assert len(stack_spec.market_spec().features) == 26
    assert stack_spec.market_spec().encode


def test_stack_oof_leakage_probe(synth_small, stack_spec):
    """Flipping targets inside meta fold j leaves that fold's F1/F2 unchanged."""
    plan = stratified_kfold(synth_small[TARGET], 3, 17)
    base = fit_meta_features(synth_small, stack_spec, plan)
    j = 1
    sel = plan.assignments == j
    y = synth_small[TARGET].copy()
    y[sel] = 1 - y[sel]
    flipped = fit_meta_features(synth_small.with_columns(**{TARGET: y}), stack_spec, plan)
    assert_array_equal(flipped.f1_oof[sel], base.f1_oof[sel])
    assert_array_equal(flipped.f2_oof[sel], base.f2_oof[sel])
    assert not np.array_equal(flipped.f2_oof[~sel], base.f2_oof[~sel])


def test_predict_stacked_pure(stacked, synth_small):
    a = predict_stacked(stacked, synth_small)
    b = predict_stacked(stacked, synth_small)
    assert_array_equal(a[0], b[0])
    assert_array_equal(a[1], b[1])
    assert_array_equal(a[0], (a[1] >= 0.5).astype(int))


def test_stack_round_trip(stacked, synth_small):
    back = StackedModel.from_dict(stacked.to_dict())
    assert_array_equal(back.predict_proba(synth_small), stacked.predict_proba(synth_small))
    assert back.to_dict() == stacked.to_dict()


def test_stack_needs_socio(synth_small, stack_spec):
    with pytest.raises(ValueError, match="socio"):
        build_stack(synth_small.drop(["hpi"]), stack_spec)


def test_generator_family_validation():
    with pytest.raises(ValueError):
        StackSpec(generators={"F1": "logistic", "F2": "boosted"})


@pytest.mark.parametrize("protocol", ["holdout", "cv"])
def test_ablation_table(synth_small, stack_spec, protocol):
    rows = ablation_table(synth_small, ("logistic", "boosted"), (1, 2, 3), FAST, protocol,
                          cv_k=3, seed=2, stack_spec=stack_spec)
    assert [(r.family, r.stage) for r in rows] == [(f, s) for s in (1, 2, 3)
                                                   for f in ("logistic", "boosted")]
    n = synth_small.n_rows if protocol == "cv" else 150
    assert all(r.report.n == n for r in rows)
    assert rows[0].protocol == ("holdout" if protocol == "holdout" else "cv3")
