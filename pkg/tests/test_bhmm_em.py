import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import match_components, sample_mixture, true_mixture

from mdera_ccuc.bhmm.em import (EmConfig, EmState, _terms, em_update_posteriors, fit_bmggmm, integration_sample,
                                log_likelihood, select_component_count, shape_derivatives)
from mdera_ccuc.bhmm.ggd import Ggdc, ReducedSimplex

FAST = EmConfig(mc_sample_count=4096, max_iter=150)


def monotone_fraction(history, rtol=1e-10):
    h = np.asarray(history)
    steps = np.diff(h) >= -rtol * np.abs(h[1:])
    return steps.mean() if steps.size else 1.0


def test_recovers_two_component_mixture():
    truth = true_mixture()
    X, _ = sample_mixture(truth, 1500, seed=5)
    fit = fit_bmggmm(X, FAST, 2)
    for f, t in match_components(fit.mixture, truth):
        assert np.max(np.abs(f.mean - t.mean)) < 0.05
        assert abs(f.weight - t.weight) < 0.05
    assert monotone_fraction(fit.history) >= 0.95


@settings(max_examples=8)
@given(st.integers(0, 1000))
def test_log_likelihood_never_drops(seed):
    rng = np.random.default_rng(seed)
    X = rng.dirichlet([3.0, 2.0, 2.0], 200)[:, :2]
    fit = fit_bmggmm(X, EmConfig(mc_sample_count=2048, max_iter=40), 2)
    assert monotone_fraction(fit.history) == 1.0
    assert sum(g.weight for g in fit.mixture) == pytest.approx(1.0, abs=1e-12)
    assert all(np.all(np.linalg.eigvalsh(g.covariance) > 0) for g in fit.mixture)


def test_posteriors_are_row_stochastic():
    rng = np.random.default_rng(0)
    X = rng.dirichlet([2.0, 2.0, 2.0], 100)[:, :2]
    region = ReducedSimplex(2)
    mix = [Ggdc([0.2, 0.3], np.eye(2) * 0.02, 1.0, 0.5), Ggdc([0.5, 0.2], np.eye(2) * 0.03, 2.0, 0.5)]
    state = EmState(X, integration_sample(region, FAST), region, mix)
    post = em_update_posteriors(state)
    assert np.allclose(post.sum(axis=1), 1.0) and np.all(post >= 0)
    assert np.isfinite(log_likelihood(state))


def test_shape_derivative_matches_finite_difference():
    rng = np.random.default_rng(2)
    X = rng.dirichlet([2.0, 3.0, 2.0], 150)[:, :2]
    region = ReducedSimplex(2)
    g = Ggdc([0.3, 0.4], [[0.03, 0.0], [0.0, 0.02]], 1.3, 1.0)
    state = EmState(X, integration_sample(region, FAST), region, [g])
    state.posteriors = em_update_posteriors(state)
    d1, _ = shape_derivatives(state, 0)

    def q(b):
        h = Ggdc(g.mean, g.covariance, b, 1.0)
        t = _terms(state, h)
        return float(np.sum(t.logf_x) - len(X) * t.log_norm)

    h = 1e-5
    assert d1 == pytest.approx((q(1.3 + h) - q(1.3 - h)) / (2 * h), rel=1e-3, abs=1e-3)


def test_bic_prefers_two_components():
    X, _ = sample_mixture(true_mixture(), 800, seed=1)
    J, _ = select_component_count(X, EmConfig(mc_sample_count=2048, max_iter=60, components_range=(1, 3)))
    assert J == 2


def test_config_validation():
    with pytest.raises(ValueError):
        EmConfig(components_range=(0, 2))
    with pytest.raises(ValueError):
        EmConfig(mc_sample_count=10)
