import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from conftest import random_xy
from salestack.linvote import (LinearModel, VotingModel, fit_logistic, logistic_grad,
                               logistic_loss, predict_voting)


@pytest.fixture(scope="module")
def data():
    return random_xy(np.random.default_rng(3), 250, 4, flip=0.2)


def _fd_grad(model, X, y, e=1e-6):
    gw = np.zeros_like(model.weights)
    for j in range(gw.size):
        for s in (1, -1):
            w = model.weights.copy()
            w[j] += s * e
            m = LinearModel(w, model.bias, model.l2, model.mean, model.scale)
            gw[j] += s * logistic_loss(m, X, y) / (2 * e)
    up = LinearModel(model.weights, model.bias + e, model.l2, model.mean, model.scale)
    dn = LinearModel(model.weights, model.bias - e, model.l2, model.mean, model.scale)
    return gw, (logistic_loss(up, X, y) - logistic_loss(dn, X, y)) / (2 * e)


def test_analytic_gradient_matches_fd(data):
    X, y = data
    rng = np.random.default_rng(0)
    m = fit_logistic(X, y, max_iters=3)
    m = LinearModel(rng.normal(size=4), 0.3, 0.1, m.mean, m.scale)
    gw, gb = logistic_grad(m, X, y)
    fw, fb = _fd_grad(m, X, y)
    assert_allclose(gw, fw, rtol=1e-5, atol=1e-8)
    assert_allclose(gb, fb, rtol=1e-5, atol=1e-8)


def test_converged_gradient_vanishes(data):
    X, y = data
    m = fit_logistic(X, y, l2=1e-3, tol=1e-8, max_iters=20000)
    assert m.converged
    fw, fb = _fd_grad(m, X, y)
    assert np.max(np.abs(fw)) <= 1e-5
    assert abs(fb) <= 1e-5


def test_loss_below_zero_model(data):
    X, y = data
    m = fit_logistic(X, y)
    zero = LinearModel(np.zeros(4), 0.0, m.l2, m.mean, m.scale)
    assert logistic_loss(m, X, y) <= logistic_loss(zero, X, y)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 100.0), st.floats(-50, 50), st.integers(0, 3))
def test_affine_rescaling_invariance(a, b, col):
    X, y = random_xy(np.random.default_rng(11), 150, 4, flip=0.25)
    X2 = X.copy()
    X2[:, col] = a * X2[:, col] + b
    p1 = fit_logistic(X, y, tol=1e-10, max_iters=20000).predict_proba(X)
    p2 = fit_logistic(X2, y, tol=1e-10, max_iters=20000).predict_proba(X2)
    assert_allclose(p1, p2, rtol=0, atol=1e-6)


def test_constant_column_has_unit_scale():
    X = np.column_stack([np.ones(20), np.arange(20.0)])
    y = (np.arange(20) > 9).astype(int)
    m = fit_logistic(X, y)
    assert m.scale[0] == 1.0
    assert np.all(m.scale > 0)


def test_logistic_round_trip(data):
    X, y = data
    m = fit_logistic(X, y)
    back = LinearModel.from_dict(m.to_dict())
    assert_array_equal(back.predict_proba(X), m.predict_proba(X))
    assert_allclose(m.importances().sum(), 1.0)


@pytest.mark.parametrize("kw", [{"l2": -1.0}, {"max_iters": 0}])
def test_logistic_rejects(data, kw):
    X, y = data
    with pytest.raises(ValueError):
        fit_logistic(X, y, **kw)


class Const:
    """Stub member returning fixed probabilities."""

    def __init__(self, p):
        self.p = np.asarray(p, dtype=float)

    def predict_proba(self, X):
        return self.p

    def importances(self):
        return np.array([1.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(0, 1), min_size=5, max_size=5), min_size=1, max_size=5))
def test_soft_vote_within_member_range(rows):
    P = np.array(rows)
    cls, p = predict_voting(VotingModel([Const(r) for r in P], "soft"), None)
    assert np.all(p >= P.min(axis=0) - 1e-15)
    assert np.all(p <= P.max(axis=0) + 1e-15)
    assert_array_equal(cls, (p >= 0.5).astype(int))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(0.001, 0.999), min_size=4, max_size=4), min_size=1,
                max_size=6))
def test_hard_vote_monotone_transform_invariance(rows):
    P = np.array(rows)
    a, _ = predict_voting(VotingModel([Const(r) for r in P], "hard"), None)
    # strictly increasing map fixing 0.5 leaves each member's class unchanged
    T = 1 / (1 + np.exp(-3 * np.log(P / (1 - P))))
    b, _ = predict_voting(VotingModel([Const(r) for r in T], "hard"), None)
    assert_array_equal(a, b)


def test_hard_vote_tie_goes_to_zero():
    m = VotingModel([Const([0.9, 0.1]), Const([0.2, 0.8])], "hard")
    cls, frac = predict_voting(m, None)
    assert_array_equal(cls, [0, 0])
    assert_array_equal(frac, [0.5, 0.5])


def test_voting_importance_mean():
    m = VotingModel([Const([0.5]), Const([0.5])])
    assert_array_equal(m.importances(), [1.0, 0.0])


@pytest.mark.parametrize("members, mode", [([], "soft"), ([Const([1.0])], "median")])
def test_voting_rejects(members, mode):
    with pytest.raises(ValueError):
        VotingModel(members, mode)
